#include "apmax/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "apmax/rng.hpp"

namespace apmax {

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return sq;
}

int nearest_center(const std::vector<double>& x,
                   const std::vector<std::vector<double>>& centers) {
    int best = 0;
    double best_sq = sq_distance(x, centers[0]);
    for (int j = 1; j < static_cast<int>(centers.size()); ++j) {
        const double sq = sq_distance(x, centers[j]);
        if (sq < best_sq) {
            best_sq = sq;
            best = j;
        }
    }
    return best;
}

// k-means++: first center uniform, later centers sampled proportionally to
// the squared distance from the nearest chosen center. With k at most the
// number of distinct points some positive-mass point always exists, so the
// chosen centers are pairwise distinct.
std::vector<std::vector<double>> seed_centers(
    const std::vector<std::vector<double>>& points, int k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    centers.push_back(points[rng.uniform_index(n)]);

    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = sq_distance(points[i], centers.back());
            if (centers.size() > 1) {
                double best = d2[i];
                for (std::size_t j = 0; j + 1 < centers.size(); ++j) {
                    best = std::min(best, sq_distance(points[i], centers[j]));
                }
                d2[i] = best;
            }
            total += d2[i];
        }
        const double r = rng.uniform01() * total;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            acc += d2[i];
            pick = i;
            if (acc > r) break;
        }
        if (pick == n) throw std::logic_error("k-means++ found no candidate");
        centers.push_back(points[pick]);
    }
    return centers;
}

double full_inertia(const std::vector<std::vector<double>>& points,
                    const std::vector<std::vector<double>>& centers) {
    double total = 0.0;
    for (const auto& x : points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) best = std::min(best, sq_distance(x, c));
        total += best;
    }
    return total;
}

}  // namespace

ClusterCenters fit_minibatch_kmeans(const std::vector<AbnormalPattern>& patterns,
                                    const KMeansConfig& config) {
    const std::size_t n = patterns.size();
    if (n == 0) throw std::invalid_argument("k-means needs a nonempty input");
    if (config.k < 1) throw std::invalid_argument("k-means needs k >= 1");
    if (config.batch_size < 1 || config.iterations < 1) {
        throw std::invalid_argument("k-means needs positive batch size and iterations");
    }

    std::vector<std::vector<double>> points(n);
    for (std::size_t i = 0; i < n; ++i) {
        points[i].assign(patterns[i].bits.begin(), patterns[i].bits.end());
    }

    std::set<std::vector<double>> distinct(points.begin(), points.end());
    if (static_cast<std::size_t>(config.k) > distinct.size()) {
        throw std::invalid_argument(
            "k-means k=" + std::to_string(config.k) + " exceeds " +
            std::to_string(distinct.size()) + " distinct patterns");
    }

    Rng rng(config.seed);
    auto centers = seed_centers(points, config.k, rng);
    std::vector<std::uint64_t> counts(config.k, 0);

    const bool full_batch = static_cast<std::size_t>(config.batch_size) >= n;
    std::vector<std::size_t> batch;
    std::vector<int> assign;
    for (int iter = 0; iter < config.iterations; ++iter) {
        if (full_batch) {
            batch.resize(n);
            std::iota(batch.begin(), batch.end(), std::size_t{0});
        } else {
            batch.resize(config.batch_size);
            for (auto& idx : batch) idx = rng.uniform_index(n);
        }

        // Assignments are frozen before any update is applied.
        assign.resize(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            assign[b] = nearest_center(points[batch[b]], centers);
        }

        // Revive centers that have never received a point: move each to the
        // batch point farthest from its assigned center (ties to the lowest
        // index, each point used at most once per pass). In full-batch mode
        // every seeded center is nearest to its own seed point, so this
        // never fires and the damped updates below keep inertia monotone.
        std::vector<bool> repaired(batch.size(), false);
        for (int j = 0; j < config.k; ++j) {
            if (counts[j] != 0) continue;
            bool used = false;
            for (int a : assign) used = used || (a == j);
            if (used) continue;
            double worst = -1.0;
            std::size_t worst_b = batch.size();
            for (std::size_t b = 0; b < batch.size(); ++b) {
                if (repaired[b]) continue;
                const double sq = sq_distance(points[batch[b]], centers[assign[b]]);
                if (sq > worst) {
                    worst = sq;
                    worst_b = b;
                }
            }
            if (worst_b == batch.size()) continue;
            centers[j] = points[batch[worst_b]];
            counts[j] = 1;
            repaired[worst_b] = true;
        }

        // Per-center cumulative learning rate: after processing its batch
        // points a center sits at the count-weighted mean of its old value
        // and those points.
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (repaired[b]) continue;
            const int j = assign[b];
            counts[j] += 1;
            const double eta = 1.0 / static_cast<double>(counts[j]);
            const auto& x = points[batch[b]];
            for (int d = 0; d < kPatternDim; ++d) {
                centers[j][d] += eta * (x[d] - centers[j][d]);
            }
        }

        if (config.inertia_trace) {
            config.inertia_trace->push_back(full_inertia(points, centers));
        }
    }

    for (auto& c : centers) {
        for (double& v : c) v = std::clamp(v, 0.0, 1.0);
    }

    ClusterCenters result;
    result.centers = std::move(centers);
    result.inertia = full_inertia(points, result.centers);
    return result;
}

double min_distance_to_centers(const AbnormalPattern& p, const ClusterCenters& c) {
    if (c.centers.empty()) {
        throw std::invalid_argument("min distance needs at least one center");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& center : c.centers) {
        best = std::min(best, pattern_distance(p, center));
    }
    return best;
}

}  // namespace apmax
