#include "apmax/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "apmax/stats.hpp"

namespace apmax {

namespace {

using nlohmann::json;

std::string_view provenance_name(RangeProvenance p) {
    return p == RangeProvenance::Literature ? "literature" : "statistical";
}

RangeProvenance provenance_from(const std::string& s) {
    if (s == "literature") return RangeProvenance::Literature;
    if (s == "statistical") return RangeProvenance::Statistical;
    throw std::runtime_error("unknown provenance '" + s + "'");
}

}  // namespace

const RangeTable& literature_ranges() {
    static const RangeTable table = [] {
        RangeTable t;
        struct Row {
            int indicator;
            NormalRange ad;
            NormalRange cn;
        };
        const Row rows[kIndicatorCount] = {
            {0, {0, 0}, {0, 0}},                               // Psychiatric
            {1, {0, 0}, {0, 0}},                               // NeurologicOther
            {2, {0, 6}, {0, 6}},                               // PresentCount21
            {3, {0, 8}, {0, 8}},                               // PresentCount28
            {4, {32.2188, 60}, {12, 13.5634}},                 // CCI12
            {5, {50.3438, 100}, {20, 22.0845}},                // CCI20
            {6, {2, 18}, {0, 0}},                              // CDRSB
            {7, {10, 70}, {0, 11.264}},                        // ADAS11
            {8, {18, 85}, {0, 17.67}},                         // ADAS13
            {9, {5, 10}, {0, 6}},                              // ADASQ4
            {10, {0, 27}, {25, 30}},                           // MMSE
            {11, {0, 23}, {26, 30}},                           // MOCA
            {12, {-30.0745, -7.6955}, {-5.1733, 4.7304}},      // mPACCdigit
            {13, {-29.7277, -6.7798}, {-4.8523, 4.3338}},      // mPACCtrailsB
        };
        for (const auto& row : rows) {
            t.at(Category::AD, row.indicator) =
                RangeEntry{row.ad, RangeProvenance::Literature};
            t.at(Category::CN, row.indicator) =
                RangeEntry{row.cn, RangeProvenance::Literature};
        }
        return t;
    }();
    return table;
}

PartialRangeTable guideline_overrides() {
    PartialRangeTable overrides;
    const auto& lit = literature_ranges();
    const int mmse = *indicator_index("MMSE");
    const int moca = *indicator_index("MOCA");
    for (Category c : known_categories()) {
        overrides.set(c, mmse, lit.at(c, mmse).range, RangeProvenance::Literature);
        overrides.set(c, moca, lit.at(c, moca).range, RangeProvenance::Literature);
    }
    return overrides;
}

RangeTable estimate_normal_ranges(const Dataset& train,
                                  const PartialRangeTable& overrides,
                                  int min_samples) {
    RangeTable table;
    for (Category c : known_categories()) {
        for (int i = 0; i < kIndicatorCount; ++i) {
            if (const auto& ov = overrides.entries[known_index(c)][i]) {
                table.at(c, i) = *ov;
                continue;
            }
            std::vector<double> values;
            for (const auto& rec : train.records) {
                if (rec.label == c && rec.values[i]) values.push_back(*rec.values[i]);
            }
            if (static_cast<int>(values.size()) < min_samples) {
                throw std::runtime_error(
                    "insufficient data for normal range of (" +
                    std::string(to_string(c)) + ", " +
                    std::string(indicator_names()[i]) + "): have " +
                    std::to_string(values.size()) + ", need " +
                    std::to_string(min_samples));
            }
            std::sort(values.begin(), values.end());
            table.at(c, i) = RangeEntry{
                NormalRange{quantile_sorted(values, 0.05),
                            quantile_sorted(values, 0.95)},
                RangeProvenance::Statistical};
        }
    }
    return table;
}

AbnormalPattern binarize(const SubjectRecord& record, const RangeTable& ranges) {
    AbnormalPattern p;
    for (int i = 0; i < kIndicatorCount; ++i) {
        if (!record.values[i]) continue;
        p.mask[i] = 1;
        const double v = *record.values[i];
        for (Category c : known_categories()) {
            if (!ranges.at(c, i).range.contains(v)) {
                p.bits[2 * i + known_index(c)] = 1;
            }
        }
    }
    return p;
}

double pattern_distance(const AbnormalPattern& a, std::span<const double> center) {
    if (center.size() != kPatternDim) {
        throw std::invalid_argument("pattern/center dimension mismatch: " +
                                    std::to_string(center.size()) + " vs " +
                                    std::to_string(kPatternDim));
    }
    double sq = 0.0;
    for (int i = 0; i < kPatternDim; ++i) {
        const double d = static_cast<double>(a.bits[i]) - center[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

json range_table_to_json(const RangeTable& table) {
    json j;
    j["format_version"] = 1;
    for (Category c : known_categories()) {
        json cat;
        for (int i = 0; i < kIndicatorCount; ++i) {
            const auto& e = table.at(c, i);
            cat[std::string(indicator_names()[i])] = {
                {"low", e.range.low},
                {"high", e.range.high},
                {"provenance", provenance_name(e.provenance)},
            };
        }
        j[std::string(to_string(c))] = std::move(cat);
    }
    return j;
}

RangeTable range_table_from_json(const json& j) {
    RangeTable table;
    for (Category c : known_categories()) {
        const auto key = std::string(to_string(c));
        if (!j.contains(key)) {
            throw std::runtime_error("range table missing category '" + key + "'");
        }
        const json& cat = j.at(key);
        for (int i = 0; i < kIndicatorCount; ++i) {
            const auto name = std::string(indicator_names()[i]);
            if (!cat.contains(name)) {
                throw std::runtime_error("range table missing indicator '" + name +
                                         "' for '" + key + "'");
            }
            const json& e = cat.at(name);
            RangeEntry entry{NormalRange{e.at("low").get<double>(),
                                         e.at("high").get<double>()},
                             provenance_from(e.at("provenance").get<std::string>())};
            if (entry.range.low > entry.range.high) {
                throw std::runtime_error("invalid range (low > high) for '" + name +
                                         "'");
            }
            table.at(c, i) = entry;
        }
    }
    return table;
}

json partial_range_table_to_json(const PartialRangeTable& table) {
    json j;
    j["format_version"] = 1;
    for (Category c : known_categories()) {
        json cat = json::object();
        for (int i = 0; i < kIndicatorCount; ++i) {
            const auto& e = table.entries[known_index(c)][i];
            if (!e) continue;
            cat[std::string(indicator_names()[i])] = {
                {"low", e->range.low},
                {"high", e->range.high},
                {"provenance", provenance_name(e->provenance)},
            };
        }
        j[std::string(to_string(c))] = std::move(cat);
    }
    return j;
}

PartialRangeTable partial_range_table_from_json(const json& j) {
    PartialRangeTable table;
    for (Category c : known_categories()) {
        const auto key = std::string(to_string(c));
        if (!j.contains(key)) continue;
        for (const auto& [name, e] : j.at(key).items()) {
            auto idx = indicator_index(name);
            if (!idx) {
                throw std::runtime_error("unknown indicator '" + name +
                                         "' in overrides");
            }
            RangeProvenance prov = RangeProvenance::Literature;
            if (e.contains("provenance")) {
                prov = provenance_from(e.at("provenance").get<std::string>());
            }
            table.entries[known_index(c)][*idx] =
                RangeEntry{NormalRange{e.at("low").get<double>(),
                                       e.at("high").get<double>()},
                           prov};
        }
    }
    return table;
}

}  // namespace apmax
