#include "graynet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>
#include <thread>

#include "graynet/det_rng.hpp"
#include "graynet/metrics.hpp"

namespace graynet::harness {

const char* axis_name(Axis axis) {
    switch (axis) {
        case Axis::EmbedDim: return "embed_dim";
        case Axis::ExtractDepth: return "extract_depth";
        case Axis::SupportSize: return "support_size";
    }
    return "embed_dim";
}

std::vector<std::string> axis_names() { return {"embed_dim", "extract_depth", "support_size"}; }

Axis parse_axis(const std::string& name) {
    if (name == "embed_dim") return Axis::EmbedDim;
    if (name == "extract_depth") return Axis::ExtractDepth;
    if (name == "support_size") return Axis::SupportSize;
    fail(Errc::invalid_spec,
         "unknown axis '" + name + "' (valid: embed_dim, extract_depth, support_size)");
}

void validate(const SweepSpec& spec) {
    require(!spec.values.empty(), Errc::invalid_spec, "sweep needs at least one value");
    for (std::size_t i = 0; i + 1 < spec.values.size(); ++i) {
        require(spec.values[i] < spec.values[i + 1], Errc::invalid_spec,
                "sweep values must be strictly increasing");
    }
    require(spec.folds >= 1, Errc::invalid_spec, "folds must be positive");
    for (std::size_t v : spec.values) {
        require(v >= 1, Errc::invalid_spec, "sweep values must be positive");
    }
}

namespace {

pipeline::HyperParams apply_axis(pipeline::HyperParams hp, Axis axis, std::size_t value) {
    switch (axis) {
        case Axis::EmbedDim: hp.embed_dim = value; break;
        case Axis::ExtractDepth: hp.extract_depth = value; break;
        case Axis::SupportSize: hp.support_size = value; break;
    }
    return hp;
}

FoldOutcome run_fold(const SweepSpec& spec, const io::SynthData& data,
                     const std::vector<std::size_t>& test_indices, std::size_t value,
                     std::size_t fold) {
    const auto started = std::chrono::steady_clock::now();

    ExperimentBase base = spec.base;
    base.hyper = apply_axis(base.hyper, spec.axis, value);
    // Decorrelate folds while keeping the whole sweep a pure function of the
    // spec seeds.
    base.train.seed = mix_seed(spec.base.train.seed, value, fold);
    base.federation.selection_seed = mix_seed(spec.base.federation.selection_seed, value, fold);

    const fed::FederationData fold_data =
        make_fold_data(data, test_indices, base.federation, mix_seed(base.train.seed, 0xF01D));

    FoldOutcome outcome;
    outcome.value = value;
    outcome.fold = fold;

    const fed::FederationResult result = fed::run_federation(
        data.graph, base.federation, base.train, base.hyper, base.activation, base.error,
        base.train_embedding, fold_data, base.xi, base.sim);
    outcome.ge = result.e_star;
    outcome.sim_seconds = result.sim_seconds;
    outcome.rounds = result.rounds;
    outcome.control_ge = untrained_control(base, fold_data);

    outcome.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return outcome;
}

}  // namespace

fed::FederationData make_fold_data(const io::SynthData& data,
                                   const std::vector<std::size_t>& test_indices,
                                   const fed::FederationConfig& cfg, std::uint64_t seed) {
    std::vector<bool> is_test(data.d_g.size(), false);
    for (std::size_t idx : test_indices) is_test[idx] = true;

    fed::FederationData out;
    out.d_ps = data.d_ps;
    out.d_a = data.d_a;
    out.d_r = data.d_r;

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < data.d_g.size(); ++i) {
        if (is_test[i]) {
            out.d_g_test.push_back(data.d_g[i]);
        } else {
            rest.push_back(i);
        }
    }
    Rng rng(mix_seed(seed, 0x5711));
    rng.shuffle(rest);
    const auto n_val = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(rest.size())));
    for (std::size_t rank = 0; rank < rest.size(); ++rank) {
        if (rank < n_val) {
            out.d_g_val.push_back(data.d_g[rest[rank]]);
        } else {
            out.d_g_train.push_back(data.d_g[rest[rank]]);
        }
    }
    return out;
}

double untrained_control(const ExperimentBase& base, const fed::FederationData& data) {
    const pipeline::EmbeddingTable table = pipeline::EmbeddingTable::seeded(
        base.hyper.embed_dim, fed::embedding_seed(base.train.seed));
    Rng init_rng(fed::model_init_seed(base.train.seed));
    const nn::NetworkParams frozen =
        nn::init_network(base.hyper.feature_width(), base.train.hidden_width, 2,
                         base.train.initial_depth, nn::Role::Congruity, init_rng);
    std::vector<metrics::Prediction> predictions;
    for (const io::FlowRecord& flow : data.d_g_test) {
        if (flow.label == io::Label::Unlabeled) continue;
        const nn::Sample sample = pipeline::featurize(flow, base.hyper, table);
        predictions.push_back(
            {flow.flow_id, fed::classify(frozen, base.activation, sample), flow.label});
    }
    return metrics::g_error(metrics::confusion(predictions, base.xi));
}

SweepResult run_sweep(const SweepSpec& spec) {
    validate(spec);
    const io::SynthData data = io::synthesize(spec.base.synth);

    std::vector<std::vector<std::size_t>> folds;
    if (spec.folds == 1) {
        // Single-fold mode keeps the configured test fraction as the fold.
        std::vector<std::size_t> order(data.d_g.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(spec.base.synth.seed, 0x1F01));
        rng.shuffle(order);
        const auto n_test = static_cast<std::size_t>(std::llround(
            spec.base.federation.test_fraction * static_cast<double>(order.size())));
        order.resize(std::max<std::size_t>(1, n_test));
        folds.push_back(order);
    } else {
        folds = metrics::kfold_split(data.d_g.size(), spec.folds,
                                     mix_seed(spec.base.synth.seed, 0xF01D5));
    }

    SweepResult result;
    result.axis = spec.axis;

    std::vector<std::pair<std::size_t, std::size_t>> jobs;  // (value, fold)
    for (std::size_t value : spec.values) {
        for (std::size_t f = 0; f < folds.size(); ++f) jobs.emplace_back(value, f);
    }
    // Independent jobs, bounded fan-out; assembly is keyed, so scheduling
    // cannot affect the result.
    const std::size_t width =
        spec.base.parallel ? std::max<unsigned>(1, std::thread::hardware_concurrency()) : 1;
    for (std::size_t begin = 0; begin < jobs.size(); begin += width) {
        const std::size_t end = std::min(jobs.size(), begin + width);
        std::vector<std::future<FoldOutcome>> wave;
        for (std::size_t j = begin; j < end; ++j) {
            const auto [value, f] = jobs[j];
            wave.push_back(std::async(std::launch::async, [&, value, f] {
                return run_fold(spec, data, folds[f], value, f);
            }));
        }
        for (auto& job : wave) result.folds.push_back(job.get());
    }

    for (std::size_t value : spec.values) {
        SweepRow row;
        row.value = value;
        double control_sum = 0.0;
        for (const FoldOutcome& outcome : result.folds) {
            if (outcome.value != value) continue;
            row.fold_ge.push_back(outcome.ge);
            control_sum += outcome.control_ge;
            row.sim_seconds += outcome.sim_seconds;
            row.wall_seconds += outcome.wall_seconds;
            ++row.federation_runs;
        }
        const double n = static_cast<double>(row.fold_ge.size());
        for (double ge : row.fold_ge) row.mean_ge += ge;
        row.mean_ge /= n;
        if (row.fold_ge.size() > 1) {
            double ss = 0.0;
            for (double ge : row.fold_ge) ss += (ge - row.mean_ge) * (ge - row.mean_ge);
            row.sd_ge = std::sqrt(ss / (n - 1.0));
        }
        row.control_ge = control_sum / n;
        result.rows.push_back(std::move(row));
    }
    return result;
}

namespace {

std::string pct(double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f%%", fraction * 100.0);
    return buf;
}

std::string secs(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    return buf;
}

}  // namespace

std::string emit_table(const SweepResult& result, TableFormat format) {
    require(!result.rows.empty(), Errc::invalid_spec, "empty sweep result");
    std::ostringstream out;
    const char* axis = axis_name(result.axis);
    if (format == TableFormat::Csv) {
        out << axis << ",mean_ge,sd,control,runtime_s\n";
        for (const SweepRow& row : result.rows) {
            out << row.value << ',' << pct(row.mean_ge) << ',' << pct(row.sd_ge) << ','
                << pct(row.control_ge) << ',' << secs(row.sim_seconds) << "\n";
        }
    } else {
        out << "| " << axis << " | mean_ge | sd | control | runtime_s |\n";
        out << "|---:|---:|---:|---:|---:|\n";
        for (const SweepRow& row : result.rows) {
            out << "| " << row.value << " | " << pct(row.mean_ge) << " | " << pct(row.sd_ge)
                << " | " << pct(row.control_ge) << " | " << secs(row.sim_seconds) << " |\n";
        }
    }
    return out.str();
}

}  // namespace graynet::harness
