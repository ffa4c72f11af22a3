#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graynet/data_io.hpp"
#include "graynet/federation.hpp"

namespace graynet::harness {

enum class Axis { EmbedDim, ExtractDepth, SupportSize };

const char* axis_name(Axis axis);
Axis parse_axis(const std::string& name);
std::vector<std::string> axis_names();

// Everything one experiment needs; the sweep clones this per axis value.
struct ExperimentBase {
    io::SynthSpec synth;
    fed::FederationConfig federation;
    trainer::TrainConfig train;
    pipeline::HyperParams hyper;
    nn::ActivationSpec activation;
    nn::ErrorConfig error;
    bool train_embedding = true;
    double xi = 0.35;
    fed::SimCost sim;
    bool parallel = true;
};

struct SweepSpec {
    Axis axis = Axis::EmbedDim;
    std::vector<std::size_t> values;
    ExperimentBase base;
    std::size_t folds = 10;
};

void validate(const SweepSpec& spec);

struct FoldOutcome {
    std::size_t value = 0;
    std::size_t fold = 0;
    double ge = 0.0;
    double control_ge = 0.0;
    double sim_seconds = 0.0;
    double wall_seconds = 0.0;
    std::vector<fed::RoundLog> rounds;
};

struct SweepRow {
    std::size_t value = 0;
    double mean_ge = 0.0;
    double sd_ge = 0.0;
    double control_ge = 0.0;  // frozen-at-initialization mean over folds
    double sim_seconds = 0.0;
    double wall_seconds = 0.0;
    std::size_t federation_runs = 0;
    std::vector<double> fold_ge;
};

struct SweepResult {
    Axis axis = Axis::EmbedDim;
    std::vector<SweepRow> rows;
    std::vector<FoldOutcome> folds;
};

// Cross-validated generalization error per axis value: k folds over the
// public pool, one federation run per fold, plus the untrained control.
// Fully deterministic under the spec's seeds.
SweepResult run_sweep(const SweepSpec& spec);

// Builds the per-fold federation data with the fold as the held-out test
// portion and the remaining pool split train/validation.
fed::FederationData make_fold_data(const io::SynthData& data,
                                   const std::vector<std::size_t>& test_indices,
                                   const fed::FederationConfig& cfg, std::uint64_t seed);

// Scores the seed-initialized model with no training at all.
double untrained_control(const ExperimentBase& base, const fed::FederationData& data);

enum class TableFormat { Csv, Markdown };

// value, mean error as a percentage with 3 decimals, standard deviation,
// untrained control, simulated runtime.
std::string emit_table(const SweepResult& result, TableFormat format);

}  // namespace graynet::harness
