// Open-set evaluation: per-class sensitivity, one-vs-rest AUC for the
// known classes, a 3x3 confusion matrix, and nonparametric bootstrap
// confidence intervals. Each bootstrap trial owns a stream derived from
// (seed, trial index), so serial and parallel runs agree bit for bit.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "apmax/indicators.hpp"

namespace apmax {

// Thrown by metrics when a resample cannot support them (a class or score
// side is absent); bootstrap_ci redraws such resamples.
struct MetricUndefined : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mann-Whitney statistic with ties counted half, computed from exact
// integer pair counts: (2*wins + ties) / (2*n_pos*n_neg). Throws
// MetricUndefined unless both sides are present.
double auc_ovr(std::span<const std::pair<double, bool>> scored);

// Correct decisions over truth count for the class; throws MetricUndefined
// when the class is absent from truth.
double sensitivity(std::span<const Category> decisions,
                   std::span<const Category> truth, Category cls);

struct BootstrapConfig {
    int resample_n = 2500;
    int trials = 2000;
    double lo_percentile = 2.5;
    double hi_percentile = 97.5;
    std::uint64_t seed = 0;
    // Trials fan out over this many OpenMP threads when > 1.
    int threads = 1;
};

// `metric` is evaluated on `trials` resamples of indices [0, n) drawn with
// replacement (resample_n draws per trial); returns the configured
// percentile pair of the trial values. A trial whose resample leaves the
// metric undefined is redrawn from the same stream, at most 10 times.
std::pair<double, double> bootstrap_ci(
    const std::function<double(std::span<const std::size_t>)>& metric,
    std::size_t n, const BootstrapConfig& config);

// Single-threaded reference with identical outputs at any thread count.
std::pair<double, double> bootstrap_ci_serial(
    const std::function<double(std::span<const std::size_t>)>& metric,
    std::size_t n, const BootstrapConfig& config);

struct PredictedRow {
    // Order (Unknown, AD, CN).
    std::array<double, 3> probs{};
    Category decision = Category::Unknown;
};

struct MetricWithCi {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct EvalReport {
    std::size_t n = 0;
    // Sensitivity for every class present in truth; AUC for the known
    // classes whose probability column has both positives and negatives.
    std::map<Category, MetricWithCi> sensitivity;
    std::map<Category, MetricWithCi> auc;
    // confusion[truth][decision], both indexed by Category value.
    std::array<std::array<std::size_t, 3>, 3> confusion{};
    BootstrapConfig bootstrap;
};

// Point metrics on the full sample plus bootstrap CIs. Each metric draws
// from its own child seed, so adding or removing one leaves the others'
// intervals unchanged. preds and truth are aligned by index.
EvalReport evaluate(std::span<const PredictedRow> preds,
                    std::span<const Category> truth,
                    const BootstrapConfig& config);

nlohmann::json eval_report_to_json(const EvalReport& report);

}  // namespace apmax
