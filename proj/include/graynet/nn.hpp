#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "graynet/det_rng.hpp"
#include "graynet/errors.hpp"

namespace graynet::nn {

enum class Activation { Tanh, Relu, Identity };

// f drives the forward pass, backward the reverse (reconstruction) pass.
// One choice per network, identical across layers.
struct ActivationSpec {
    Activation forward = Activation::Tanh;
    Activation backward = Activation::Tanh;
};

double activate(Activation a, double z);
double activate_derivative(Activation a, double z);

// One affine stage: rows of `weights` are the connection vectors, one per
// output unit, plus a bias scalar per unit.
struct LayerParams {
    std::size_t units_in = 0;
    std::size_t units_out = 0;
    std::vector<double> weights;  // row-major, units_out x units_in
    std::vector<double> biases;   // units_out

    double w(std::size_t row, std::size_t col) const { return weights[row * units_in + col]; }
    double& w(std::size_t row, std::size_t col) { return weights[row * units_in + col]; }
};

// Congruity = globally shared model, Federated = client-local model.
enum class Role : std::uint32_t { Congruity = 0, Federated = 1 };

// Layer list indexed h = 0..hidden_layers+1: index 0 is the input layer,
// the last index is the output layer, everything between is hidden.
struct NetworkParams {
    std::vector<LayerParams> layers;
    std::size_t hidden_layers = 0;  // adaptable hidden-layer count; layers.size() == hidden_layers + 2
    Role role = Role::Congruity;
    // Active output support-set size; 0 means unconstrained. When nonzero,
    // all but this many output rows are held at zero by the trainer.
    std::size_t output_support = 0;

    std::size_t input_width() const { return layers.empty() ? 0 : layers.front().units_in; }
    std::size_t output_width() const { return layers.empty() ? 0 : layers.back().units_out; }
};

// Coefficients of the error function and of the support constraints.
// `lambda` weights the reconstruction term; one entry broadcasts over the
// batch, otherwise the length must match the batch.
struct ErrorConfig {
    std::vector<double> lambda{0.1};
    std::size_t support_k = 512;
    double beta_a = 1.0;
    double beta_r = 1.0;
    double beta_g = 1.0;

    double lambda_for(std::size_t sample_index, std::size_t batch_size) const;
};

// One training sample. `y` is the one-hot label; unlabeled samples carry
// labeled=false and contribute only the reconstruction term.
struct Sample {
    std::vector<double> x;
    std::vector<double> y;
    bool labeled = true;
};

struct ForwardTrace {
    // pre[l] = affine output of stage l; act[0] = input, act[l+1] = f(pre[l]).
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;

    const std::vector<double>& output() const { return act.back(); }
};

// Gradient container shaped exactly like the parameter list it was taken
// against (weights/biases only).
struct Gradients {
    std::vector<LayerParams> layers;
};

LayerParams init_layer(std::size_t units_in, std::size_t units_out, Rng& rng);

NetworkParams init_network(std::size_t input_width, std::size_t hidden_width,
                           std::size_t output_width, std::size_t hidden_layer_count,
                           Role role, Rng& rng);

// Layer-by-layer affine + activation; keeps every intermediate value so
// gradients can be taken afterwards.
ForwardTrace forward(const NetworkParams& params, const ActivationSpec& act,
                     std::span<const double> x);

// Reverse pass: runs the stages backwards through the transposed
// connection vectors with activation g, reconstructing an input-width
// vector. The forward bias is reused where the reverse width allows it and
// zero-filled beyond.
std::vector<double> backward_reconstruct(const NetworkParams& params, const ActivationSpec& act,
                                         std::span<const double> y);

// Supervised squared error plus lambda-weighted reconstruction error,
// summed over the batch. The reconstruction compares each input against the
// reverse pass applied to the network's own forward output, so it needs no
// label.
double error(const NetworkParams& params, const ActivationSpec& act, const ErrorConfig& cfg,
             std::span<const Sample> batch);

// Analytic d(error)/d(theta) for every weight and bias, including the
// reconstruction term (which ties each weight matrix into both passes).
// When input_grads is nonnull it receives d(error)/d(x) per sample.
Gradients gradient(const NetworkParams& params, const ActivationSpec& act, const ErrorConfig& cfg,
                   std::span<const Sample> batch,
                   std::vector<std::vector<double>>* input_grads = nullptr);

Gradients zero_gradients(const NetworkParams& params);

// Indices of the k largest-magnitude entries, ties toward the lower index,
// returned in ascending index order. k larger than the vector returns all
// indices.
std::vector<std::size_t> support(std::span<const double> y, std::size_t k);

// Hard-thresholding projection: zero every entry outside support(y, k).
std::vector<double> project_support(std::vector<double> y, std::size_t k);

// Inserts a freshly initialized hidden layer of the given width before the
// output layer. Existing layers are preserved; the output layer is
// re-initialized only if its input width no longer matches.
NetworkParams grow_depth(NetworkParams params, std::size_t hidden_width, Rng& rng);

// Versioned binary layout: header (magic, version, role, depth, support,
// layer widths) followed by row-major 64-bit floats per layer. Round trips
// byte-identically.
std::vector<std::uint8_t> serialize_params(const NetworkParams& params);
NetworkParams parse_params(std::span<const std::uint8_t> bytes);
void save_params(const NetworkParams& params, const std::string& path);
NetworkParams load_params(const std::string& path);

std::uint64_t params_checksum(const NetworkParams& params);

// Total number of weight and bias scalars.
std::size_t parameter_count(const NetworkParams& params);

}  // namespace graynet::nn
