#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graynet/data_labels.hpp"

namespace graynet::metrics {

// Class-conditional rates: tp + fn = 1 over actual anomalies, tn + fp = 1
// over actual normals. xi is the balance coefficient of the error metric.
struct ConfusionRates {
    double tp = 0.0;
    double fn = 0.0;
    double tn = 0.0;
    double fp = 0.0;
    double xi = 0.35;
};

struct Prediction {
    std::string flow_id;
    io::Label predicted = io::Label::Normal;
    io::Label actual = io::Label::Normal;
};

void validate(const ConfusionRates& rates);

// Tallies class-conditional rates; both actual classes must be present.
ConfusionRates confusion(std::span<const Prediction> predictions, double xi);

// Balance-weighted misidentification over one plus balance-weighted correct
// identification; always lands in [0, 1].
double g_error(const ConfusionRates& rates);

// Seeded shuffle then contiguous chunking; fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                  std::uint64_t seed);

}  // namespace graynet::metrics
