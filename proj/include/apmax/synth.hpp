// Synthetic diagnosis cohorts. Known categories draw each indicator from a
// law over that category's published normal range; Unknown records draw
// from the band between the two categories' range boundaries (widened 10%)
// so they overlap both known distributions. Each record observes exactly
// one strategy's indicator subset; everything else is missing.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "apmax/dataset.hpp"
#include "apmax/indicators.hpp"
#include "apmax/pattern.hpp"

namespace apmax {

struct SamplingLaw {
    enum class Kind { Uniform, TruncatedNormal };
    Kind kind = Kind::Uniform;
    double lo = 0.0;
    double hi = 1.0;
    // TruncatedNormal parameters; rejection-sampled into [lo, hi].
    double mean = 0.0;
    double stddev = 1.0;
};

struct Strategy {
    std::vector<int> indicators;
    double weight = 0.0;
};

struct CohortSpec {
    int n_ad = 0;
    int n_cn = 0;
    int n_unknown = 0;
    // Indexed by Category value (Unknown, AD, CN).
    std::array<std::array<SamplingLaw, kIndicatorCount>, 3> laws{};
    std::vector<Strategy> strategies;
    std::uint64_t seed = 0;
};

enum class CohortPreset { Screening, SingleStrategy, MultiStrategy };

std::optional<CohortPreset> preset_from_string(std::string_view s);
std::string_view to_string(CohortPreset p);

// The middle two of the four sorted range boundaries, widened by 5% of
// their gap on each side: the overlap (or gap) region between the two
// categories' normal values.
NormalRange unknown_band(const NormalRange& ad, const NormalRange& cn);

// Uniform laws over the published ranges (and the unknown band), zero
// counts, seed 0, and the preset's strategy catalog: screening observes
// all 14 indicators, single-strategy one fixed 10-indicator subset,
// multi-strategy nine weighted subsets of varying size.
CohortSpec default_spec(CohortPreset preset);

// Records are emitted in blocks AD, CN, Unknown from one seeded stream;
// ids are AD0001/CN0001/UN0001-style with a single visit v1. Throws on
// negative counts, empty or out-of-range strategy subsets, weights not
// summing to 1, or invalid laws.
Dataset generate_cohort(const CohortSpec& spec);

}  // namespace apmax
