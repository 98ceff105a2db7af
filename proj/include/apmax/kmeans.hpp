// Mini-batch k-means over binary abnormal patterns.
//
// Centers live in [0,1]^28 (convex combinations of binary points). Fitting
// follows the mini-batch scheme: k-means++ seeding, per-batch frozen
// assignments, per-center cumulative-count learning rates. With
// batch_size >= n every iteration processes the whole input in order and
// the full-data inertia is non-increasing across iterations.

#pragma once

#include <cstdint>
#include <vector>

#include "apmax/pattern.hpp"

namespace apmax {

struct ClusterCenters {
    // Each center has dimension kPatternDim.
    std::vector<std::vector<double>> centers;
    // Sum of squared distances from every fitting pattern to its nearest
    // center, recomputed over the full input after the last iteration.
    double inertia = 0.0;

    int k() const { return static_cast<int>(centers.size()); }
};

struct KMeansConfig {
    int k = 3;
    int batch_size = 256;
    int iterations = 100;
    std::uint64_t seed = 0;
    // When set, receives the full-input inertia after every iteration.
    std::vector<double>* inertia_trace = nullptr;
};

// Deterministic given the seed. Throws if patterns is empty or k exceeds
// the number of distinct bit vectors in the input.
ClusterCenters fit_minibatch_kmeans(const std::vector<AbnormalPattern>& patterns,
                                    const KMeansConfig& config);

// Minimum pattern_distance over all centers. Throws if centers is empty or
// dimensions mismatch.
double min_distance_to_centers(const AbnormalPattern& p, const ClusterCenters& c);

}  // namespace apmax
