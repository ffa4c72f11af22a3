#include "graynet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace graynet::nn {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr double kInitSpan = 0.05;

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    append_u64(out, bits);
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::uint64_t u64() { return take(8); }

    double f64() {
        const std::uint64_t bits = take(8);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    void expect_magic() {
        require(bytes_.size() - pos_ >= 8, Errc::parse_error, "parameter blob too short");
        require(std::memcmp(bytes_.data() + pos_, kMagic, 8) == 0, Errc::parse_error,
                "bad parameter magic");
        pos_ += 8;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::uint64_t take(std::size_t n) {
        require(bytes_.size() - pos_ >= n, Errc::parse_error, "truncated parameter blob");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += n;
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void check_shapes(const NetworkParams& params) {
    require(params.layers.size() == params.hidden_layers + 2, Errc::shape_mismatch,
            "layer list length must be hidden_layers + 2");
    for (std::size_t h = 0; h + 1 < params.layers.size(); ++h) {
        require(params.layers[h].units_out == params.layers[h + 1].units_in, Errc::shape_mismatch,
                "adjacent layer widths incompatible");
    }
}

}  // namespace

double activate(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Identity: return z;
    }
    return z;
}

double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

double ErrorConfig::lambda_for(std::size_t sample_index, std::size_t batch_size) const {
    if (lambda.empty()) return 0.0;
    if (lambda.size() == 1) return lambda[0];
    require(lambda.size() == batch_size, Errc::dimension_mismatch,
            "lambda length must be 1 or match the batch");
    return lambda[sample_index];
}

LayerParams init_layer(std::size_t units_in, std::size_t units_out, Rng& rng) {
    LayerParams layer;
    layer.units_in = units_in;
    layer.units_out = units_out;
    layer.weights.resize(units_in * units_out);
    layer.biases.assign(units_out, 0.0);
    for (double& w : layer.weights) w = rng.uniform(-kInitSpan, kInitSpan);
    return layer;
}

NetworkParams init_network(std::size_t input_width, std::size_t hidden_width,
                           std::size_t output_width, std::size_t hidden_layer_count,
                           Role role, Rng& rng) {
    require(input_width > 0 && hidden_width > 0 && output_width > 0, Errc::dimension_mismatch,
            "network widths must be positive");
    NetworkParams params;
    params.role = role;
    params.hidden_layers = hidden_layer_count;
    params.layers.push_back(init_layer(input_width, hidden_width, rng));
    for (std::size_t h = 0; h < hidden_layer_count; ++h) {
        params.layers.push_back(init_layer(hidden_width, hidden_width, rng));
    }
    params.layers.push_back(init_layer(hidden_width, output_width, rng));
    return params;
}

ForwardTrace forward(const NetworkParams& params, const ActivationSpec& act,
                     std::span<const double> x) {
    check_shapes(params);
    require(x.size() == params.input_width(), Errc::dimension_mismatch,
            "input width does not match layer 0");
    for (double v : x) {
        require(std::isfinite(v), Errc::nonfinite_input, "non-finite network input");
    }

    ForwardTrace trace;
    trace.act.emplace_back(x.begin(), x.end());
    for (const LayerParams& layer : params.layers) {
        const std::vector<double>& in = trace.act.back();
        std::vector<double> z(layer.units_out);
        for (std::size_t j = 0; j < layer.units_out; ++j) {
            double acc = layer.biases[j];
            const double* row = layer.weights.data() + j * layer.units_in;
            for (std::size_t i = 0; i < layer.units_in; ++i) acc += row[i] * in[i];
            z[j] = acc;
        }
        std::vector<double> a(layer.units_out);
        for (std::size_t j = 0; j < layer.units_out; ++j) a[j] = activate(act.forward, z[j]);
        trace.pre.push_back(std::move(z));
        trace.act.push_back(std::move(a));
    }
    return trace;
}

namespace {

// Reverse affine of one layer: transposed weights, forward bias reused
// entrywise where it exists.
std::vector<double> reverse_affine(const LayerParams& layer, const std::vector<double>& r) {
    std::vector<double> s(layer.units_in, 0.0);
    for (std::size_t i = 0; i < layer.units_in; ++i) {
        s[i] = i < layer.units_out ? layer.biases[i] : 0.0;
    }
    for (std::size_t j = 0; j < layer.units_out; ++j) {
        const double rj = r[j];
        if (rj == 0.0) continue;
        const double* row = layer.weights.data() + j * layer.units_in;
        for (std::size_t i = 0; i < layer.units_in; ++i) s[i] += row[i] * rj;
    }
    return s;
}

struct ReverseTrace {
    // pre[l] and post[l] for stage l of the reverse sweep; post.back() = x_hat.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

ReverseTrace reverse_pass(const NetworkParams& params, const ActivationSpec& act,
                          const std::vector<double>& y) {
    ReverseTrace trace;
    std::vector<double> r = y;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        std::vector<double> s = reverse_affine(params.layers[li], r);
        std::vector<double> g(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) g[i] = activate(act.backward, s[i]);
        trace.pre.push_back(std::move(s));
        r = g;
        trace.post.push_back(std::move(g));
    }
    return trace;
}

}  // namespace

std::vector<double> backward_reconstruct(const NetworkParams& params, const ActivationSpec& act,
                                         std::span<const double> y) {
    check_shapes(params);
    require(y.size() == params.output_width(), Errc::dimension_mismatch,
            "vector width does not match the output layer");
    const std::vector<double> yv(y.begin(), y.end());
    return reverse_pass(params, act, yv).post.back();
}

double error(const NetworkParams& params, const ActivationSpec& act, const ErrorConfig& cfg,
             std::span<const Sample> batch) {
    require(!batch.empty(), Errc::empty_batch, "error() needs a nonempty batch");
    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Sample& sample = batch[s];
        const ForwardTrace trace = forward(params, act, sample.x);
        const std::vector<double>& y_pred = trace.output();
        if (sample.labeled) {
            require(sample.y.size() == y_pred.size(), Errc::dimension_mismatch,
                    "label width does not match the output layer");
            for (std::size_t j = 0; j < y_pred.size(); ++j) {
                const double d = sample.y[j] - y_pred[j];
                total += d * d;
            }
        }
        const double lambda = cfg.lambda_for(s, batch.size());
        if (lambda != 0.0) {
            const std::vector<double> x_hat = reverse_pass(params, act, y_pred).post.back();
            for (std::size_t i = 0; i < x_hat.size(); ++i) {
                const double d = sample.x[i] - x_hat[i];
                total += lambda * d * d;
            }
        }
    }
    return total;
}

Gradients zero_gradients(const NetworkParams& params) {
    Gradients grads;
    grads.layers.reserve(params.layers.size());
    for (const LayerParams& layer : params.layers) {
        LayerParams g;
        g.units_in = layer.units_in;
        g.units_out = layer.units_out;
        g.weights.assign(layer.weights.size(), 0.0);
        g.biases.assign(layer.biases.size(), 0.0);
        grads.layers.push_back(std::move(g));
    }
    return grads;
}

Gradients gradient(const NetworkParams& params, const ActivationSpec& act, const ErrorConfig& cfg,
                   std::span<const Sample> batch,
                   std::vector<std::vector<double>>* input_grads) {
    require(!batch.empty(), Errc::empty_batch, "gradient() needs a nonempty batch");
    Gradients grads = zero_gradients(params);
    if (input_grads) input_grads->assign(batch.size(), {});

    const std::size_t stages = params.layers.size();
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Sample& sample = batch[s];
        const double lambda = cfg.lambda_for(s, batch.size());
        const ForwardTrace fwd = forward(params, act, sample.x);
        const std::vector<double>& y_pred = fwd.output();

        // d(error)/d(output), before backing through the forward stack.
        std::vector<double> d_out(y_pred.size(), 0.0);
        if (sample.labeled) {
            require(sample.y.size() == y_pred.size(), Errc::dimension_mismatch,
                    "label width does not match the output layer");
            for (std::size_t j = 0; j < y_pred.size(); ++j) {
                d_out[j] = 2.0 * (y_pred[j] - sample.y[j]);
            }
        }

        std::vector<double> dx_direct;  // direct reconstruction dependence on x
        if (lambda != 0.0) {
            const ReverseTrace rev = reverse_pass(params, act, y_pred);
            const std::vector<double>& x_hat = rev.post.back();

            // Walk the reverse sweep in its own order, pushing sensitivities
            // from x_hat back up to the forward output. Sweep step t handled
            // layer index stages-1-t.
            std::vector<double> dr(x_hat.size());
            for (std::size_t i = 0; i < x_hat.size(); ++i) {
                dr[i] = 2.0 * lambda * (x_hat[i] - sample.x[i]);
            }
            if (input_grads) {
                dx_direct.resize(sample.x.size());
                for (std::size_t i = 0; i < sample.x.size(); ++i) {
                    dx_direct[i] = 2.0 * lambda * (sample.x[i] - x_hat[i]);
                }
            }
            for (std::size_t t = rev.pre.size(); t-- > 0;) {
                const std::size_t li = stages - 1 - t;
                const LayerParams& layer = params.layers[li];
                LayerParams& g = grads.layers[li];
                const std::vector<double>& s_pre = rev.pre[t];
                // r fed into this reverse stage: output of the previous sweep
                // step, or y_pred for the first one.
                const std::vector<double>& r_in = t == 0 ? y_pred : rev.post[t - 1];

                std::vector<double> ds(s_pre.size());
                for (std::size_t i = 0; i < s_pre.size(); ++i) {
                    ds[i] = dr[i] * activate_derivative(act.backward, s_pre[i]);
                }
                std::vector<double> dr_next(layer.units_out, 0.0);
                for (std::size_t j = 0; j < layer.units_out; ++j) {
                    double* grow = g.weights.data() + j * layer.units_in;
                    const double* row = layer.weights.data() + j * layer.units_in;
                    const double rj = r_in[j];
                    double acc = 0.0;
                    for (std::size_t i = 0; i < layer.units_in; ++i) {
                        grow[i] += ds[i] * rj;
                        acc += row[i] * ds[i];
                    }
                    dr_next[j] = acc;
                }
                const std::size_t bias_reach = std::min(layer.units_in, layer.units_out);
                for (std::size_t i = 0; i < bias_reach; ++i) g.biases[i] += ds[i];
                dr = std::move(dr_next);
            }
            // Whatever reached the top of the reverse sweep is sensitivity on
            // the forward output itself.
            for (std::size_t j = 0; j < d_out.size(); ++j) d_out[j] += dr[j];
        }

        // Standard backprop down the forward stack.
        std::vector<double> da = std::move(d_out);
        for (std::size_t li = stages; li-- > 0;) {
            const LayerParams& layer = params.layers[li];
            LayerParams& g = grads.layers[li];
            const std::vector<double>& z = fwd.pre[li];
            const std::vector<double>& a_in = fwd.act[li];

            std::vector<double> dz(layer.units_out);
            for (std::size_t j = 0; j < layer.units_out; ++j) {
                dz[j] = da[j] * activate_derivative(act.forward, z[j]);
            }
            std::vector<double> da_prev(layer.units_in, 0.0);
            for (std::size_t j = 0; j < layer.units_out; ++j) {
                const double dzj = dz[j];
                g.biases[j] += dzj;
                double* grow = g.weights.data() + j * layer.units_in;
                const double* row = layer.weights.data() + j * layer.units_in;
                if (dzj == 0.0) continue;
                for (std::size_t i = 0; i < layer.units_in; ++i) {
                    grow[i] += dzj * a_in[i];
                    da_prev[i] += row[i] * dzj;
                }
            }
            da = std::move(da_prev);
        }

        if (input_grads) {
            std::vector<double>& dx = (*input_grads)[s];
            dx = std::move(da);
            if (!dx_direct.empty()) {
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_direct[i];
            }
        }
    }
    return grads;
}

std::vector<std::size_t> support(std::span<const double> y, std::size_t k) {
    require(k >= 1, Errc::nonpositive_k, "support size must be at least 1");
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(y[a]) > std::fabs(y[b]);
    });
    if (k < order.size()) order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<double> project_support(std::vector<double> y, std::size_t k) {
    if (k >= y.size()) {
        require(k >= 1, Errc::nonpositive_k, "support size must be at least 1");
        return y;
    }
    const std::vector<std::size_t> keep = support(y, k);
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t idx : keep) out[idx] = y[idx];
    return out;
}

NetworkParams grow_depth(NetworkParams params, std::size_t hidden_width, Rng& rng) {
    check_shapes(params);
    const LayerParams& output = params.layers.back();
    const std::size_t feed_width = output.units_in;
    LayerParams fresh = init_layer(feed_width, hidden_width, rng);
    params.layers.insert(params.layers.end() - 1, std::move(fresh));
    if (params.layers.back().units_in != hidden_width) {
        params.layers.back() = init_layer(hidden_width, output.units_out, rng);
    }
    params.hidden_layers += 1;
    return params;
}

std::vector<std::uint8_t> serialize_params(const NetworkParams& params) {
    check_shapes(params);
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    append_u32(out, kVersion);
    append_u32(out, static_cast<std::uint32_t>(params.role));
    append_u64(out, params.hidden_layers);
    append_u64(out, params.output_support);
    append_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const LayerParams& layer : params.layers) {
        append_u32(out, static_cast<std::uint32_t>(layer.units_in));
        append_u32(out, static_cast<std::uint32_t>(layer.units_out));
    }
    for (const LayerParams& layer : params.layers) {
        for (double b : layer.biases) append_f64(out, b);
        for (double w : layer.weights) append_f64(out, w);
    }
    return out;
}

NetworkParams parse_params(std::span<const std::uint8_t> bytes) {
    ByteReader reader(bytes);
    reader.expect_magic();
    const std::uint32_t version = reader.u32();
    require(version == kVersion, Errc::parse_error, "unsupported parameter version");
    NetworkParams params;
    const std::uint32_t role = reader.u32();
    require(role <= 1, Errc::parse_error, "bad role tag");
    params.role = static_cast<Role>(role);
    params.hidden_layers = reader.u64();
    params.output_support = reader.u64();
    const std::uint32_t n_layers = reader.u32();
    require(n_layers == params.hidden_layers + 2, Errc::parse_error,
            "layer count does not match depth");
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    dims.reserve(n_layers);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::size_t in = reader.u32();
        const std::size_t out_w = reader.u32();
        dims.emplace_back(in, out_w);
    }
    for (auto [in, out_w] : dims) {
        LayerParams layer;
        layer.units_in = in;
        layer.units_out = out_w;
        layer.biases.resize(out_w);
        for (double& b : layer.biases) b = reader.f64();
        layer.weights.resize(in * out_w);
        for (double& w : layer.weights) w = reader.f64();
        params.layers.push_back(std::move(layer));
    }
    require(reader.exhausted(), Errc::parse_error, "trailing bytes after parameter blob");
    check_shapes(params);
    return params;
}

void save_params(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::io_error, "cannot open " + path);
    const std::vector<std::uint8_t> bytes = serialize_params(params);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), Errc::io_error, "write failed: " + path);
}

NetworkParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::io_error, "cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return parse_params(bytes);
    } catch (const Error& e) {
        fail(e.code(), path + ": " + e.what());
    }
}

std::uint64_t params_checksum(const NetworkParams& params) {
    const std::vector<std::uint8_t> bytes = serialize_params(params);
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::size_t parameter_count(const NetworkParams& params) {
    std::size_t n = 0;
    for (const LayerParams& layer : params.layers) {
        n += layer.weights.size() + layer.biases.size();
    }
    return n;
}

}  // namespace graynet::nn
