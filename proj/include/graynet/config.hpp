#pragma once

#include <map>
#include <string>
#include <vector>

#include "graynet/harness.hpp"

namespace graynet::config {

// One nested document drives every command: synthesis, federation,
// training, hyperparameters, error coefficients, sweep grids and optional
// dataset/graph/parameter paths.
struct Experiment {
    harness::ExperimentBase base;
    std::map<std::string, std::vector<std::size_t>> sweep_values;
    std::size_t folds = 10;
    std::string data_dir;      // generated dataset directory; empty = synthesize
    std::string graph_path;    // graph document; empty = synthesized graph
    std::string init_params;   // optional warm-start parameter file

    std::vector<std::size_t> values_for(harness::Axis axis) const;
};

Experiment default_experiment();
Experiment parse(const std::string& json_text);
Experiment load(const std::string& path);
std::string to_json(const Experiment& experiment);

// Re-seeds synthesis, training and client selection from one base value.
void override_seed(Experiment& experiment, std::uint64_t seed);

struct RuntimeData {
    graph::ActionRelationalGraph graph;
    io::SynthData synth;
};

// Synthesizes or loads the datasets the experiment names.
RuntimeData prepare_data(const Experiment& experiment);

}  // namespace graynet::config
