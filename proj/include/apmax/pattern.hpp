// Normal-range estimation and abnormal-pattern encoding.
//
// For every known category each indicator has a normal range; a subject's
// abnormal pattern flags, per indicator and per category, whether the
// observed value falls outside that category's range. Missing indicators
// encode as normal (bit 0) and are tracked in a separate observation mask
// that is carried for diagnostics but takes no part in distances.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "apmax/dataset.hpp"
#include "apmax/indicators.hpp"

namespace apmax {

struct NormalRange {
    double low = 0.0;
    double high = 0.0;

    bool contains(double v) const { return v >= low && v <= high; }
    bool operator==(const NormalRange&) const = default;
};

enum class RangeProvenance { Literature, Statistical };

struct RangeEntry {
    NormalRange range;
    RangeProvenance provenance = RangeProvenance::Statistical;

    bool operator==(const RangeEntry&) const = default;
};

// Complete table: an entry for every (known category, indicator) pair.
class RangeTable {
public:
    const RangeEntry& at(Category c, int indicator) const {
        return entries_[known_index(c)][indicator];
    }
    RangeEntry& at(Category c, int indicator) {
        return entries_[known_index(c)][indicator];
    }

    bool operator==(const RangeTable&) const = default;

private:
    std::array<std::array<RangeEntry, kIndicatorCount>, kKnownCategoryCount>
        entries_{};
};

// Sparse table used for guideline overrides.
struct PartialRangeTable {
    std::array<std::array<std::optional<RangeEntry>, kIndicatorCount>,
               kKnownCategoryCount>
        entries{};

    void set(Category c, int indicator, NormalRange range,
             RangeProvenance prov = RangeProvenance::Literature) {
        entries[known_index(c)][indicator] = RangeEntry{range, prov};
    }
};

// The published normal-range table for all 14 indicators (used as the
// default sampling basis for synthetic cohorts and as the source of the
// MMSE/MOCA guideline bounds).
const RangeTable& literature_ranges();

// MMSE and MOCA rows of the literature table; the default override set for
// range estimation, since those two come from diagnostic guidelines rather
// than statistics.
PartialRangeTable guideline_overrides();

// Per category and indicator, the 5th/95th percentiles (linear
// interpolation) of that category's observed training values. Overridden
// entries are copied verbatim. Entries not covered by an override need at
// least `min_samples` observed values, else throws naming the pair.
RangeTable estimate_normal_ranges(const Dataset& train,
                                  const PartialRangeTable& overrides,
                                  int min_samples = 20);

struct AbnormalPattern {
    // Indicator-major: bits[2*i] = abnormal vs AD, bits[2*i+1] = vs CN.
    std::array<std::uint8_t, kPatternDim> bits{};
    // mask[i] = 1 iff indicator i was observed.
    std::array<std::uint8_t, kIndicatorCount> mask{};

    bool operator==(const AbnormalPattern&) const = default;
};

// bit(i, c) = 1 iff values[i] is observed and outside category c's range.
// Bounds are inclusive at both ends.
AbnormalPattern binarize(const SubjectRecord& record, const RangeTable& ranges);

// Euclidean distance between a pattern (bits as 0/1 reals) and a
// real-valued center. Throws on dimension mismatch.
double pattern_distance(const AbnormalPattern& a, std::span<const double> center);

nlohmann::json range_table_to_json(const RangeTable& table);
RangeTable range_table_from_json(const nlohmann::json& j);
nlohmann::json partial_range_table_to_json(const PartialRangeTable& table);
PartialRangeTable partial_range_table_from_json(const nlohmann::json& j);

}  // namespace apmax
