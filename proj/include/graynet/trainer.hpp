#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graynet/nn.hpp"
#include "graynet/pipeline.hpp"

namespace graynet::trainer {

// Training-loop constants. depth_cap mirrors the packet-level extraction
// depth; hidden_width is the uniform width of hidden layers (and of fresh
// layers inserted by depth growth).
struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    double min_delta = 1e-4;
    std::size_t depth_cap = 3;
    std::uint64_t seed = 1;
    std::size_t hidden_width = 64;
    std::size_t initial_depth = 1;
    std::size_t max_degree = 0;     // width cap; 0 = hidden_width
    std::size_t client_epochs = 1;  // local sweeps per client per round
};

void validate(const TrainConfig& cfg);

struct SplitDataset {
    std::vector<nn::Sample> train;
    std::vector<nn::Sample> val;
};

// The three optimization domains: actional, relational, public.
struct PhaseDatasets {
    std::vector<nn::Sample> d_a;
    std::vector<nn::Sample> d_r;
    SplitDataset d_g;
};

struct StageTrace {
    std::string name;
    std::vector<double> errors;  // per-epoch evaluation error
};

struct DepthStep {
    std::size_t depth = 0;
    double val_error = 0.0;
    bool accepted = false;
};

struct TrainReport {
    double final_error = 0.0;
    std::size_t epochs_run = 0;
    std::size_t depth_final = 0;
    std::vector<StageTrace> phase_errors;
    std::vector<DepthStep> depth_trace;
    std::size_t steps = 0;  // gradient updates applied

    std::string to_json() const;
    void merge(const TrainReport& other);
};

// Greedy layer-wise pass: stage h trains layer h together with the output
// readout on the path through layers 0..h, earlier layers frozen.
std::pair<nn::NetworkParams, TrainReport> layerwise_train(nn::NetworkParams params,
                                                          const TrainConfig& cfg,
                                                          const nn::ActivationSpec& act,
                                                          const nn::ErrorConfig& errcfg,
                                                          const SplitDataset& d_g);

// Trains to saturation, then repeatedly grows depth, keeping a grown net
// only while its saturated validation error strictly improves and the depth
// cap is not hit.
std::pair<nn::NetworkParams, TrainReport> adapt_depth(nn::NetworkParams params,
                                                      const TrainConfig& cfg,
                                                      const nn::ActivationSpec& act,
                                                      const nn::ErrorConfig& errcfg,
                                                      const SplitDataset& d_g);

// Actional / relational / public phases in order, each constraining the
// output support to ceil(beta_phase * k) by zeroing the discarded output
// rows after every update (projected-gradient enforcement).
nn::NetworkParams constrained_phases(nn::NetworkParams params, const TrainConfig& cfg,
                                     const nn::ActivationSpec& act,
                                     const nn::ErrorConfig& errcfg, const PhaseDatasets& phases,
                                     TrainReport* report = nullptr);

// Client-side featurization context. The table is a local working copy; its
// updates stay on the client.
struct ClientEnv {
    pipeline::HyperParams hp;
    pipeline::EmbeddingTable table;
    bool train_embedding = true;
};

// Full client path: featurize private flows, then mini-batch descent on the
// error function. Only the updated parameters leave the call.
nn::NetworkParams client_local_train(nn::NetworkParams params, const TrainConfig& cfg,
                                     const nn::ActivationSpec& act,
                                     const nn::ErrorConfig& errcfg, ClientEnv env,
                                     std::span<const io::FlowRecord> d_ps,
                                     TrainReport* report = nullptr);

// Regression-style encodings of the actional/relational tuples at the
// network's input width: endpoint attributes up front, squashed duration or
// weights as the target.
std::vector<nn::Sample> encode_action_samples(std::span<const io::ActionSample> rows,
                                              std::size_t input_width,
                                              std::size_t output_width);
std::vector<nn::Sample> encode_relation_samples(std::span<const io::RelationSample> rows,
                                                std::size_t input_width,
                                                std::size_t output_width);

}  // namespace graynet::trainer
