#include "apmax/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace apmax {

namespace {

using nlohmann::json;

// Mean of log(1 + theta*x)/theta, the profile scale r(theta) of the GPD
// likelihood; continuous through theta = 0 where it equals the mean.
double gpd_profile_scale(std::span<const double> x, double theta) {
    double sum = 0.0;
    for (double v : x) {
        const double u = theta * v;
        if (std::abs(u) < 1e-8) {
            sum += v * (1.0 - u / 2.0 + u * u / 3.0);
        } else {
            sum += std::log1p(u) / theta;
        }
    }
    return sum / static_cast<double>(x.size());
}

// Per-point profile log-likelihood of the GPD in theta = zeta/mu.
double gpd_profile_loglik(std::span<const double> x, double theta) {
    const double r = gpd_profile_scale(x, theta);
    if (!(r > 0.0) || !std::isfinite(r)) {
        return -std::numeric_limits<double>::infinity();
    }
    return -std::log(r) - theta * r - 1.0;
}

struct ShapeEquation {
    // Tilted statistics at shape k, computed with weights (x/x_max)^k so
    // large shapes cannot overflow. g is strictly increasing in k.
    std::span<const double> x;
    std::vector<double> log_x;
    double mean_log = 0.0;
    double log_max = 0.0;

    explicit ShapeEquation(std::span<const double> sample) : x(sample) {
        log_x.reserve(x.size());
        for (double v : x) log_x.push_back(std::log(v));
        log_max = *std::max_element(log_x.begin(), log_x.end());
        for (double lv : log_x) mean_log += lv;
        mean_log /= static_cast<double>(x.size());
    }

    // g(k) = E_w[log x] - 1/k - mean(log x), g'(k) = Var_w[log x] + 1/k^2.
    void eval(double k, double& g, double& dg) const {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double w = std::exp(k * (log_x[i] - log_max));
            s0 += w;
            s1 += w * log_x[i];
            s2 += w * log_x[i] * log_x[i];
        }
        const double m = s1 / s0;
        g = m - 1.0 / k - mean_log;
        dg = (s2 / s0 - m * m) + 1.0 / (k * k);
    }
};

}  // namespace

std::vector<double> largest_values(std::span<const double> samples, int count) {
    if (count < 1 || static_cast<std::size_t>(count) > samples.size()) {
        throw std::invalid_argument("largest_values count out of range");
    }
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return {sorted.end() - count, sorted.end()};
}

double weibull_log_likelihood(std::span<const double> positive_sample,
                              double shape, double scale) {
    const double n = static_cast<double>(positive_sample.size());
    double sum_log = 0.0, sum_pow = 0.0;
    for (double v : positive_sample) {
        sum_log += std::log(v);
        sum_pow += std::pow(v / scale, shape);
    }
    return n * std::log(shape) - n * shape * std::log(scale) +
           (shape - 1.0) * sum_log - sum_pow;
}

double weibull_scale_for_shape(std::span<const double> positive_sample,
                               double shape) {
    // (mean of x^k)^(1/k), computed relative to the max to avoid overflow.
    double max_v = 0.0;
    for (double v : positive_sample) max_v = std::max(max_v, v);
    double sum = 0.0;
    for (double v : positive_sample) sum += std::pow(v / max_v, shape);
    return max_v *
           std::pow(sum / static_cast<double>(positive_sample.size()), 1.0 / shape);
}

WeibullTailModel fit_weibull_tail(std::span<const double> samples, int tail_size) {
    if (tail_size < 5) {
        throw std::invalid_argument("weibull tail fit needs tail_size >= 5");
    }
    if (samples.size() < static_cast<std::size_t>(tail_size)) {
        throw std::invalid_argument("weibull tail fit needs at least tail_size samples");
    }
    std::vector<double> tail = largest_values(samples, tail_size);
    if (tail.front() == tail.back()) {
        throw std::invalid_argument("degenerate tail (zero variance)");
    }

    const double shift = tail.front() <= 0.0 ? -tail.front() + 1e-6 : 0.0;
    for (double& v : tail) v += shift;

    const ShapeEquation eq(tail);

    // Moment start: the log of a Weibull sample has stddev pi/(k*sqrt(6)).
    double var_log = 0.0;
    for (double lv : eq.log_x) {
        var_log += (lv - eq.mean_log) * (lv - eq.mean_log);
    }
    var_log /= static_cast<double>(tail.size());
    double k = std::clamp(1.28255 / std::sqrt(var_log), 0.02, 90.0);

    constexpr double kLo = 0.01, kHi = 100.0;
    constexpr int kMaxIter = 200;
    double g = 0.0, dg = 0.0;
    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
        eq.eval(k, g, dg);
        if (std::abs(g) < 1e-11) {
            converged = true;
            break;
        }
        const double next = k - g / dg;
        if (!std::isfinite(next) || next <= kLo || next >= kHi) break;
        if (std::abs(next - k) < 1e-13 * k) {
            k = next;
            converged = true;
            break;
        }
        k = next;
    }

    if (!converged) {
        double lo = kLo, hi = kHi;
        double g_lo, g_hi, unused;
        eq.eval(lo, g_lo, unused);
        eq.eval(hi, g_hi, unused);
        if (g_lo > 0.0 || g_hi < 0.0) {
            throw std::runtime_error(
                "weibull shape equation not bracketed on [0.01, 100]: residuals " +
                std::to_string(g_lo) + ", " + std::to_string(g_hi));
        }
        for (int it = 0; it < kMaxIter && hi - lo > 1e-13 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            double g_mid;
            eq.eval(mid, g_mid, unused);
            (g_mid < 0.0 ? lo : hi) = mid;
        }
        k = 0.5 * (lo + hi);
        eq.eval(k, g, dg);
        if (std::abs(g) > 1e-6) {
            throw std::runtime_error("weibull shape fit did not converge, residual " +
                                     std::to_string(g));
        }
    }

    WeibullTailModel m;
    m.shape = k;
    m.scale = weibull_scale_for_shape(tail, k);
    m.shift = shift;
    m.tail_size = tail_size;
    return m;
}

double w_score(const WeibullTailModel& m, double d) {
    const double z = d + m.shift;
    if (z <= 0.0) return 0.0;
    return -std::expm1(-std::pow(z / m.scale, m.shape));
}

int default_tail_size(std::size_t n) {
    const std::size_t half = (n + 1) / 2;
    return static_cast<int>(std::min<std::size_t>(20, half));
}

double gpd_cdf(const GpdModel& m, double omega) {
    if (omega <= 0.0) return 0.0;
    if (m.zeta == 0.0) return -std::expm1(-omega / m.mu);
    const double arg = 1.0 + m.zeta * omega / m.mu;
    if (arg <= 0.0) {
        throw std::domain_error("excess outside GPD support");
    }
    return 1.0 - std::pow(arg, -1.0 / m.zeta);
}

GpdModel fit_gpd(std::span<const double> excesses) {
    if (excesses.size() < 10) {
        throw std::invalid_argument("GPD fit needs at least 10 excesses");
    }
    double max_x = -std::numeric_limits<double>::infinity();
    double min_x = std::numeric_limits<double>::infinity();
    double mean_x = 0.0;
    for (double v : excesses) {
        if (!(v > 0.0)) throw std::invalid_argument("GPD excesses must be positive");
        max_x = std::max(max_x, v);
        min_x = std::min(min_x, v);
        mean_x += v;
    }
    mean_x /= static_cast<double>(excesses.size());
    if (min_x == max_x) {
        throw std::invalid_argument("degenerate excesses (zero variance)");
    }

    // theta must stay above -1/max so every log argument is positive.
    const double theta_lo = (-1.0 / max_x) * (1.0 - 1e-9);
    const double theta_hi = 50.0 / mean_x;
    constexpr int kGrid = 512;
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    auto grid_theta = [&](int i) {
        return theta_lo + (theta_hi - theta_lo) * i / (kGrid - 1);
    };
    for (int i = 0; i < kGrid; ++i) {
        const double ll = gpd_profile_loglik(excesses, grid_theta(i));
        if (ll > best_ll) {
            best_ll = ll;
            best = i;
        }
    }
    if (best == kGrid - 1) {
        throw std::runtime_error("GPD fit did not converge (likelihood increasing at grid edge)");
    }

    double a = grid_theta(std::max(0, best - 1));
    double b = grid_theta(std::min(kGrid - 1, best + 1));
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - (b - a) * kInvPhi;
    double d = a + (b - a) * kInvPhi;
    double fc = gpd_profile_loglik(excesses, c);
    double fd = gpd_profile_loglik(excesses, d);
    for (int it = 0; it < 120; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * kInvPhi;
            fc = gpd_profile_loglik(excesses, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * kInvPhi;
            fd = gpd_profile_loglik(excesses, d);
        }
    }
    const double theta = 0.5 * (a + b);

    GpdModel m;
    if (std::abs(theta) * mean_x < 1e-8) {
        m.zeta = 0.0;
        m.mu = mean_x;
    } else {
        const double r = gpd_profile_scale(excesses, theta);
        m.zeta = theta * r;
        m.mu = r;
    }
    m.u = 0.0;
    return m;
}

json weibull_to_json(const WeibullTailModel& m) {
    return {{"kind", "weibull"},
            {"shape", m.shape},
            {"scale", m.scale},
            {"shift", m.shift},
            {"tail_size", m.tail_size}};
}

WeibullTailModel weibull_from_json(const json& j) {
    if (j.at("kind").get<std::string>() != "weibull") {
        throw std::runtime_error("expected kind 'weibull'");
    }
    WeibullTailModel m;
    m.shape = j.at("shape").get<double>();
    m.scale = j.at("scale").get<double>();
    m.shift = j.at("shift").get<double>();
    m.tail_size = j.at("tail_size").get<int>();
    if (!(m.shape > 0.0) || !(m.scale > 0.0) || !std::isfinite(m.shape) ||
        !std::isfinite(m.scale) || !std::isfinite(m.shift)) {
        throw std::runtime_error("invalid weibull parameters");
    }
    return m;
}

json gpd_to_json(const GpdModel& m) {
    return {{"kind", "gpd"}, {"zeta", m.zeta}, {"mu", m.mu}, {"u", m.u}};
}

GpdModel gpd_from_json(const json& j) {
    if (j.at("kind").get<std::string>() != "gpd") {
        throw std::runtime_error("expected kind 'gpd'");
    }
    GpdModel m;
    m.zeta = j.at("zeta").get<double>();
    m.mu = j.at("mu").get<double>();
    m.u = j.at("u").get<double>();
    if (!(m.mu > 0.0) || !std::isfinite(m.zeta) || !std::isfinite(m.mu)) {
        throw std::runtime_error("invalid GPD parameters");
    }
    return m;
}

}  // namespace apmax
