#include "graynet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "graynet/det_rng.hpp"

namespace graynet::trainer {

namespace {

using nn::NetworkParams;
using nn::Sample;

double mean_error(const NetworkParams& params, const nn::ActivationSpec& act,
                  const nn::ErrorConfig& errcfg, std::span<const Sample> samples) {
    return nn::error(params, act, errcfg, samples) / static_cast<double>(samples.size());
}

// Zero every output row outside the k units with the largest mean output
// magnitude over the batch. With f(0) = 0 this pins the discarded units to
// zero for every input.
void project_output_rows(NetworkParams& params, const nn::ActivationSpec& act,
                         std::span<const Sample> batch, std::size_t k) {
    const std::size_t width = params.output_width();
    if (k >= width) return;
    std::vector<double> magnitude(width, 0.0);
    for (const Sample& sample : batch) {
        const auto trace = nn::forward(params, act, sample.x);
        const std::vector<double>& y = trace.output();
        for (std::size_t j = 0; j < width; ++j) magnitude[j] += std::fabs(y[j]);
    }
    const std::vector<std::size_t> keep = nn::support(magnitude, k);
    std::vector<bool> kept(width, false);
    for (std::size_t j : keep) kept[j] = true;
    nn::LayerParams& out = params.layers.back();
    for (std::size_t j = 0; j < width; ++j) {
        if (kept[j]) continue;
        out.biases[j] = 0.0;
        std::fill(out.weights.begin() + static_cast<std::ptrdiff_t>(j * out.units_in),
                  out.weights.begin() + static_cast<std::ptrdiff_t>((j + 1) * out.units_in), 0.0);
    }
}

void apply_update(NetworkParams& params, const nn::Gradients& grads, double scale,
                  const std::vector<bool>* trainable) {
    if (scale == 0.0) return;  // exact identity at zero learning rate
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        if (trainable && !(*trainable)[li]) continue;
        nn::LayerParams& layer = params.layers[li];
        const nn::LayerParams& g = grads.layers[li];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= scale * g.weights[i];
        for (std::size_t i = 0; i < layer.biases.size(); ++i) layer.biases[i] -= scale * g.biases[i];
    }
}

struct LoopOutcome {
    NetworkParams params;
    double best_error = 0.0;
    std::size_t epochs_run = 0;
    std::size_t steps = 0;
    std::vector<double> trace;
};

// Mini-batch gradient descent with early stopping: keep the best-validation
// snapshot, stop after `patience` epochs without an improvement greater
// than min_delta.
LoopOutcome descend(NetworkParams params, const TrainConfig& cfg, const nn::ActivationSpec& act,
                    const nn::ErrorConfig& errcfg, std::span<const Sample> train,
                    std::span<const Sample> val, Rng& rng,
                    const std::vector<bool>* trainable = nullptr,
                    std::size_t projection_k = 0) {
    LoopOutcome out;
    out.params = std::move(params);
    NetworkParams best = out.params;
    double best_err = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        std::vector<Sample> batch;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            batch.assign(take, {});
            for (std::size_t i = 0; i < take; ++i) batch[i] = train[order[pos + i]];
            const nn::Gradients grads = nn::gradient(out.params, act, errcfg, batch);
            apply_update(out.params, grads, cfg.learning_rate / static_cast<double>(take),
                         trainable);
            if (projection_k > 0) project_output_rows(out.params, act, batch, projection_k);
            ++out.steps;
        }
        ++out.epochs_run;
        const double err = mean_error(out.params, act, errcfg, val);
        out.trace.push_back(err);
        if (best_err - err > cfg.min_delta) {
            best_err = err;
            best = out.params;
            stale = 0;
        } else {
            if (err < best_err) {  // tiny improvement still worth keeping
                best_err = err;
                best = out.params;
            }
            ++stale;
            if (stale >= cfg.patience) break;
        }
    }
    out.params = std::move(best);
    out.best_error = best_err;
    return out;
}

}  // namespace

void validate(const TrainConfig& cfg) {
    require(cfg.learning_rate >= 0.0, Errc::invalid_spec, "learning_rate must be nonnegative");
    require(cfg.batch_size >= 1, Errc::invalid_spec, "batch_size must be positive");
    require(cfg.max_epochs >= 1, Errc::invalid_spec, "max_epochs must be positive");
    require(cfg.patience >= 1, Errc::invalid_spec, "patience must be positive");
    require(cfg.min_delta >= 0.0, Errc::invalid_spec, "min_delta must be nonnegative");
    require(cfg.hidden_width >= 1, Errc::invalid_spec, "hidden_width must be positive");
}

std::string TrainReport::to_json() const {
    nlohmann::json doc;
    doc["final_error"] = final_error;
    doc["epochs_run"] = epochs_run;
    doc["depth_final"] = depth_final;
    doc["steps"] = steps;
    doc["phase_errors"] = nlohmann::json::array();
    for (const StageTrace& stage : phase_errors) {
        doc["phase_errors"].push_back({{"name", stage.name}, {"errors", stage.errors}});
    }
    doc["depth_trace"] = nlohmann::json::array();
    for (const DepthStep& step : depth_trace) {
        doc["depth_trace"].push_back(
            {{"depth", step.depth}, {"val_error", step.val_error}, {"accepted", step.accepted}});
    }
    return doc.dump();
}

void TrainReport::merge(const TrainReport& other) {
    final_error = other.final_error;
    epochs_run += other.epochs_run;
    depth_final = std::max(depth_final, other.depth_final);
    steps += other.steps;
    phase_errors.insert(phase_errors.end(), other.phase_errors.begin(), other.phase_errors.end());
    depth_trace.insert(depth_trace.end(), other.depth_trace.begin(), other.depth_trace.end());
}

std::pair<NetworkParams, TrainReport> layerwise_train(NetworkParams params, const TrainConfig& cfg,
                                                      const nn::ActivationSpec& act,
                                                      const nn::ErrorConfig& errcfg,
                                                      const SplitDataset& d_g) {
    validate(cfg);
    require(!d_g.train.empty() && !d_g.val.empty(), Errc::empty_dataset,
            "layer-wise training needs train and validation data");

    TrainReport report;
    report.depth_final = params.hidden_layers;
    for (std::size_t stage = 0; stage <= params.hidden_layers; ++stage) {
        // Sub-network: layers 0..stage plus the output readout.
        NetworkParams sub;
        sub.role = params.role;
        sub.hidden_layers = stage;
        sub.layers.assign(params.layers.begin(),
                          params.layers.begin() + static_cast<std::ptrdiff_t>(stage + 1));
        sub.layers.push_back(params.layers.back());

        std::vector<bool> trainable(sub.layers.size(), false);
        trainable[stage] = true;
        trainable[sub.layers.size() - 1] = true;

        Rng rng(mix_seed(cfg.seed, 0x575A, stage));
        LoopOutcome outcome = descend(std::move(sub), cfg, act, errcfg, d_g.train, d_g.val, rng,
                                      &trainable);

        params.layers[stage] = outcome.params.layers[stage];
        params.layers.back() = outcome.params.layers.back();

        report.phase_errors.push_back({"layer-" + std::to_string(stage), outcome.trace});
        report.epochs_run += outcome.epochs_run;
        report.steps += outcome.steps;
        report.final_error = outcome.best_error;
    }
    return {std::move(params), std::move(report)};
}

std::pair<NetworkParams, TrainReport> adapt_depth(NetworkParams params, const TrainConfig& cfg,
                                                  const nn::ActivationSpec& act,
                                                  const nn::ErrorConfig& errcfg,
                                                  const SplitDataset& d_g) {
    validate(cfg);
    require(!d_g.train.empty() && !d_g.val.empty(), Errc::empty_dataset,
            "depth adaptation needs train and validation data");
    require(cfg.depth_cap >= params.hidden_layers, Errc::invalid_spec,
            "depth_cap below the current depth");

    TrainReport report;
    Rng loop_rng(mix_seed(cfg.seed, 0xADA0));
    LoopOutcome best = descend(std::move(params), cfg, act, errcfg, d_g.train, d_g.val, loop_rng);
    report.epochs_run += best.epochs_run;
    report.steps += best.steps;
    report.phase_errors.push_back({"saturate-" + std::to_string(best.params.hidden_layers),
                                   best.trace});
    report.depth_trace.push_back({best.params.hidden_layers, best.best_error, true});

    Rng grow_rng(mix_seed(cfg.seed, 0xADA1));
    while (best.params.hidden_layers < cfg.depth_cap) {
        NetworkParams grown = nn::grow_depth(best.params, cfg.hidden_width, grow_rng);
        LoopOutcome candidate =
            descend(std::move(grown), cfg, act, errcfg, d_g.train, d_g.val, loop_rng);
        report.epochs_run += candidate.epochs_run;
        report.steps += candidate.steps;
        report.phase_errors.push_back(
            {"saturate-" + std::to_string(candidate.params.hidden_layers), candidate.trace});
        const bool improved = candidate.best_error < best.best_error;
        report.depth_trace.push_back(
            {candidate.params.hidden_layers, candidate.best_error, improved});
        if (!improved) break;
        best = std::move(candidate);
    }

    report.depth_final = best.params.hidden_layers;
    report.final_error = best.best_error;
    return {std::move(best.params), std::move(report)};
}

nn::NetworkParams constrained_phases(NetworkParams params, const TrainConfig& cfg,
                                     const nn::ActivationSpec& act, const nn::ErrorConfig& errcfg,
                                     const PhaseDatasets& phases, TrainReport* report) {
    validate(cfg);
    require(!phases.d_a.empty() || !phases.d_r.empty() || !phases.d_g.train.empty(),
            Errc::empty_dataset, "all three phase datasets are empty");

    struct Phase {
        const char* name;
        std::span<const Sample> data;
        double beta;
    };
    const Phase plan[] = {
        {"actional", phases.d_a, errcfg.beta_a},
        {"relational", phases.d_r, errcfg.beta_r},
        {"public", phases.d_g.train, errcfg.beta_g},
    };

    const std::size_t width = params.output_width();
    for (std::size_t pi = 0; pi < 3; ++pi) {
        const Phase& phase = plan[pi];
        if (phase.data.empty()) continue;
        const auto k_eff =
            static_cast<std::size_t>(std::ceil(phase.beta * double(errcfg.support_k)));
        require(k_eff >= 1, Errc::nonpositive_k, "phase support size collapsed to zero");
        params.output_support = k_eff < width ? k_eff : 0;

        // One sweep over all batches, projecting after every update.
        Rng rng(mix_seed(cfg.seed, 0xF5E0, pi));
        std::vector<std::size_t> order(phase.data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        StageTrace trace{phase.name, {}};
        std::vector<Sample> batch;
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            batch.assign(take, {});
            for (std::size_t i = 0; i < take; ++i) batch[i] = phase.data[order[pos + i]];
            const nn::Gradients grads = nn::gradient(params, act, errcfg, batch);
            apply_update(params, grads, cfg.learning_rate / static_cast<double>(take), nullptr);
            if (k_eff < width) project_output_rows(params, act, batch, k_eff);
            if (report) ++report->steps;
        }
        trace.errors.push_back(mean_error(params, act, errcfg, phase.data));
        if (report) {
            report->phase_errors.push_back(std::move(trace));
            report->final_error = report->phase_errors.back().errors.back();
        }
    }
    return params;
}

namespace {

struct FlowFeatures {
    Sample sample;
    std::vector<std::vector<std::uint8_t>> bytes;  // segmented packets
    std::vector<double> scale;                     // 1/(hi-lo) per channel, 0 if constant
};

FlowFeatures featurize_flow(const io::FlowRecord& flow, const pipeline::HyperParams& hp,
                            const pipeline::EmbeddingTable& table) {
    FlowFeatures out;
    out.bytes = pipeline::segment_flow(flow, hp);
    const pipeline::RawTensor raw = pipeline::embed_bytes(out.bytes, table);
    const pipeline::FeatureTensor tensor =
        pipeline::normalize_features(raw, hp, flow.flow_id, flow.label);

    out.scale.assign(hp.embed_dim, 0.0);
    std::vector<double> lo(hp.embed_dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(hp.embed_dim, -std::numeric_limits<double>::infinity());
    const std::size_t cells = raw.packets * raw.packet_len;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t d = 0; d < hp.embed_dim; ++d) {
            const double v = raw.data[cell * hp.embed_dim + d];
            lo[d] = std::min(lo[d], v);
            hi[d] = std::max(hi[d], v);
        }
    }
    for (std::size_t d = 0; d < hp.embed_dim; ++d) {
        const double span = hi[d] - lo[d];
        out.scale[d] = span > 0.0 ? 1.0 / span : 0.0;
    }

    out.sample.x = pipeline::sparse_encode(tensor, hp);
    switch (flow.label) {
        case io::Label::Anomaly: out.sample.y = {1.0, 0.0}; break;
        case io::Label::Normal: out.sample.y = {0.0, 1.0}; break;
        case io::Label::Unlabeled: out.sample.y = {0.0, 0.0}; break;
    }
    out.sample.labeled = flow.label != io::Label::Unlabeled;
    return out;
}

// Push input-space gradients back into the embedding rows through the
// retained support entries and the per-channel normalization scale. The
// channel extrema are treated as constants of the step.
void update_embedding(pipeline::EmbeddingTable& table, const FlowFeatures& flow,
                      std::span<const double> dx, const pipeline::HyperParams& hp, double step) {
    if (step == 0.0) return;
    for (std::size_t idx = 0; idx < dx.size(); ++idx) {
        const double g = dx[idx];
        if (g == 0.0 || flow.sample.x[idx] == 0.0) continue;
        const std::size_t d = idx % hp.embed_dim;
        const std::size_t cell = idx / hp.embed_dim;
        const std::size_t packet = cell / hp.packet_len;
        if (packet >= flow.bytes.size()) continue;  // zero padding
        const std::size_t offset = cell % hp.packet_len;
        const std::uint8_t byte = flow.bytes[packet][offset];
        table.table[std::size_t(byte) * hp.embed_dim + d] -= step * g * flow.scale[d];
    }
}

}  // namespace

nn::NetworkParams client_local_train(NetworkParams params, const TrainConfig& cfg,
                                     const nn::ActivationSpec& act, const nn::ErrorConfig& errcfg,
                                     ClientEnv env, std::span<const io::FlowRecord> d_ps,
                                     TrainReport* report) {
    validate(cfg);
    pipeline::validate(env.hp);
    require(!d_ps.empty(), Errc::empty_dataset, "client has no private flows");

    Rng rng(mix_seed(cfg.seed, 0xC7E0));
    NetworkParams best = params;
    double best_err = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    StageTrace trace{"client", {}};

    std::vector<std::size_t> order(d_ps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::size_t epochs_run = 0;
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        // Features reflect the table as of the start of the epoch.
        std::vector<FlowFeatures> features;
        features.reserve(d_ps.size());
        for (const io::FlowRecord& flow : d_ps) {
            features.push_back(featurize_flow(flow, env.hp, env.table));
        }

        rng.shuffle(order);
        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            std::vector<Sample> batch(take);
            for (std::size_t i = 0; i < take; ++i) batch[i] = features[order[pos + i]].sample;

            std::vector<std::vector<double>> input_grads;
            const nn::Gradients grads =
                nn::gradient(params, act, errcfg, batch,
                             env.train_embedding ? &input_grads : nullptr);
            const double scale = cfg.learning_rate / static_cast<double>(take);
            apply_update(params, grads, scale, nullptr);
            if (env.train_embedding) {
                for (std::size_t i = 0; i < take; ++i) {
                    update_embedding(env.table, features[order[pos + i]], input_grads[i], env.hp,
                                     scale);
                }
            }
            ++steps;
        }
        ++epochs_run;

        std::vector<Sample> all(features.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = features[i].sample;
        const double err = mean_error(params, act, errcfg, all);
        trace.errors.push_back(err);
        if (best_err - err > cfg.min_delta) {
            best_err = err;
            best = params;
            stale = 0;
        } else {
            if (err < best_err) {
                best_err = err;
                best = params;
            }
            ++stale;
            if (stale >= cfg.patience) break;
        }
    }

    if (report) {
        report->epochs_run += epochs_run;
        report->steps += steps;
        report->final_error = best_err;
        report->depth_final = best.hidden_layers;
        report->phase_errors.push_back(std::move(trace));
    }
    return best;
}

std::vector<nn::Sample> encode_action_samples(std::span<const io::ActionSample> rows,
                                              std::size_t input_width,
                                              std::size_t output_width) {
    std::vector<Sample> samples;
    samples.reserve(rows.size());
    for (const io::ActionSample& row : rows) {
        Sample s;
        s.x.assign(input_width, 0.0);
        for (std::size_t i = 0; i < row.features.size() && i < input_width; ++i) {
            s.x[i] = row.features[i];
        }
        s.y.assign(output_width, 0.0);
        // Squash the duration into the activation range.
        s.y[0] = 1.0 / (1.0 + row.duration);
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<nn::Sample> encode_relation_samples(std::span<const io::RelationSample> rows,
                                                std::size_t input_width,
                                                std::size_t output_width) {
    std::vector<Sample> samples;
    samples.reserve(rows.size());
    for (const io::RelationSample& row : rows) {
        Sample s;
        s.x.assign(input_width, 0.0);
        for (std::size_t i = 0; i < row.features.size() && i < input_width; ++i) {
            s.x[i] = row.features[i];
        }
        s.y.assign(output_width, 0.0);
        s.y[0] = row.w_forward / (1.0 + row.w_forward);
        if (output_width > 1) s.y[1] = row.w_backward / (1.0 + row.w_backward);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace graynet::trainer
