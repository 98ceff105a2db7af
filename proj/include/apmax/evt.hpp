// Extreme-value tail models over combined distances.
//
// WeibullTailModel mirrors the libMR FitHigh procedure: take the largest
// tail_size values, translate them onto positive support, and fit a
// two-parameter Weibull by maximum likelihood. Its CDF (w_score) rates how
// extreme a new distance is. GpdModel is the peaks-over-threshold
// alternative, fitted to positive threshold excesses.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace apmax {

struct WeibullTailModel {
    double shape = 1.0;
    double scale = 1.0;
    // Translation applied before evaluating the CDF so the fitted tail is
    // strictly positive: -(min of tail) + 1e-6 when min <= 0, else 0.
    double shift = 0.0;
    int tail_size = 0;
};

struct GpdModel {
    double zeta = 0.0;
    double mu = 1.0;
    // Threshold the excesses were measured from; 0 for a direct fit.
    double u = 0.0;
};

// The `count` largest values of `samples`, ascending. Throws if count is
// not in [1, samples.size()].
std::vector<double> largest_values(std::span<const double> samples, int count);

// Weibull log-likelihood of a positive sample; used by fitting and by the
// local-optimum property test.
double weibull_log_likelihood(std::span<const double> positive_sample,
                              double shape, double scale);

// Profile-likelihood scale for a fixed shape: (mean of x^shape)^(1/shape).
// At shape 1 this is the sample mean, the closed-form exponential MLE.
double weibull_scale_for_shape(std::span<const double> positive_sample,
                               double shape);

// MLE fit to the tail_size largest values. Requires
// samples.size() >= tail_size >= 5 and a non-degenerate tail. Newton on the
// profiled shape equation with bisection fallback on [0.01, 100]; throws
// with the residual if neither converges within 200 iterations.
WeibullTailModel fit_weibull_tail(std::span<const double> samples, int tail_size);

// Weibull CDF at (d + shift), clamped to 0 on non-positive support.
// Non-decreasing in d with limit 1.
double w_score(const WeibullTailModel& m, double d);

// min(20, ceil(n/2)): the default tail size when none is configured.
int default_tail_size(std::size_t n);

// CDF of the excess distribution: 1 - (1 + zeta*w/mu)^(-1/zeta), or the
// exponential CDF 1 - e^(-w/mu) at zeta = 0. Returns 0 for w <= 0; throws
// past the finite endpoint when zeta < 0.
double gpd_cdf(const GpdModel& m, double omega);

// MLE over positive excesses via the profile likelihood in theta = zeta/mu
// (grid-seeded, then golden-section refinement). Requires >= 10 positive,
// non-identical excesses.
GpdModel fit_gpd(std::span<const double> excesses);

nlohmann::json weibull_to_json(const WeibullTailModel& m);
WeibullTailModel weibull_from_json(const nlohmann::json& j);
nlohmann::json gpd_to_json(const GpdModel& m);
GpdModel gpd_from_json(const nlohmann::json& j);

}  // namespace apmax
