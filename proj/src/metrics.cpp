#include "graynet/metrics.hpp"

#include <cmath>
#include <numeric>

#include "graynet/det_rng.hpp"
#include "graynet/errors.hpp"

namespace graynet::metrics {

void validate(const ConfusionRates& rates) {
    require(rates.xi >= 0.0 && rates.xi <= 1.0, Errc::invalid_spec, "xi must lie in [0, 1]");
    for (double r : {rates.tp, rates.fn, rates.tn, rates.fp}) {
        require(r >= 0.0 && r <= 1.0, Errc::invalid_spec, "rates must lie in [0, 1]");
    }
    require(std::fabs(rates.tp + rates.fn - 1.0) <= 1e-12, Errc::invalid_spec,
            "tp + fn must equal 1");
    require(std::fabs(rates.tn + rates.fp - 1.0) <= 1e-12, Errc::invalid_spec,
            "tn + fp must equal 1");
}

ConfusionRates confusion(std::span<const Prediction> predictions, double xi) {
    std::size_t anomalies = 0, anomalies_hit = 0;
    std::size_t normals = 0, normals_hit = 0;
    for (const Prediction& p : predictions) {
        require(p.actual != io::Label::Unlabeled && p.predicted != io::Label::Unlabeled,
                Errc::invalid_spec, "predictions must carry resolved labels");
        if (p.actual == io::Label::Anomaly) {
            ++anomalies;
            if (p.predicted == io::Label::Anomaly) ++anomalies_hit;
        } else {
            ++normals;
            if (p.predicted == io::Label::Normal) ++normals_hit;
        }
    }
    require(anomalies > 0, Errc::missing_class, "no actual-anomaly predictions");
    require(normals > 0, Errc::missing_class, "no actual-normal predictions");

    ConfusionRates rates;
    rates.xi = xi;
    rates.tp = static_cast<double>(anomalies_hit) / static_cast<double>(anomalies);
    rates.fn = static_cast<double>(anomalies - anomalies_hit) / static_cast<double>(anomalies);
    rates.tn = static_cast<double>(normals_hit) / static_cast<double>(normals);
    rates.fp = static_cast<double>(normals - normals_hit) / static_cast<double>(normals);
    validate(rates);
    return rates;
}

double g_error(const ConfusionRates& rates) {
    validate(rates);
    const double xi = rates.xi;
    return (xi * rates.fn + (1.0 - xi) * rates.fp) /
           (1.0 + xi * rates.tn + (1.0 - xi) * rates.tp);
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                  std::uint64_t seed) {
    require(k >= 2, Errc::invalid_spec, "k-fold needs k >= 2");
    require(n >= k, Errc::too_few_samples, "dataset smaller than fold count");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

}  // namespace graynet::metrics
