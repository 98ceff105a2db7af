#include "apmax/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>

#include "apmax/rng.hpp"

namespace apmax {

namespace {

double sample_law(const SamplingLaw& law, Rng& rng) {
    if (law.kind == SamplingLaw::Kind::Uniform) {
        return rng.uniform(law.lo, law.hi);
    }
    // Rejection sampling; a law whose bounds carry negligible normal mass
    // degrades to the last draw clamped into the bounds.
    double v = law.mean;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        v = law.mean + law.stddev * rng.normal();
        if (v >= law.lo && v <= law.hi) return v;
    }
    return std::clamp(v, law.lo, law.hi);
}

void validate_spec(const CohortSpec& spec) {
    if (spec.n_ad < 0 || spec.n_cn < 0 || spec.n_unknown < 0) {
        throw std::invalid_argument("cohort counts must be nonnegative");
    }
    if (spec.strategies.empty()) {
        throw std::invalid_argument("cohort needs at least one strategy");
    }
    double total = 0.0;
    for (const auto& s : spec.strategies) {
        if (s.indicators.empty()) {
            throw std::invalid_argument("strategy subsets must be nonempty");
        }
        std::set<int> seen;
        for (int i : s.indicators) {
            if (i < 0 || i >= kIndicatorCount) {
                throw std::invalid_argument("strategy indicator index out of range");
            }
            if (!seen.insert(i).second) {
                throw std::invalid_argument("strategy subset repeats an indicator");
            }
        }
        if (!(s.weight > 0.0)) {
            throw std::invalid_argument("strategy weights must be positive");
        }
        total += s.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("strategy weights must sum to 1");
    }
    for (const auto& per_category : spec.laws) {
        for (const auto& law : per_category) {
            if (!(law.lo <= law.hi)) {
                throw std::invalid_argument("sampling law needs lo <= hi");
            }
            if (law.kind == SamplingLaw::Kind::TruncatedNormal &&
                !(law.stddev > 0.0)) {
                throw std::invalid_argument("truncated normal needs positive stddev");
            }
        }
    }
}

const Strategy& pick_strategy(const std::vector<Strategy>& strategies, Rng& rng) {
    const double r = rng.uniform01();
    double acc = 0.0;
    for (const auto& s : strategies) {
        acc += s.weight;
        if (r < acc) return s;
    }
    return strategies.back();
}

std::string subject_id(Category c, int index) {
    const char* prefix = c == Category::AD ? "AD" : c == Category::CN ? "CN" : "UN";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%04d", prefix, index);
    return buf;
}

}  // namespace

std::optional<CohortPreset> preset_from_string(std::string_view s) {
    if (s == "screening") return CohortPreset::Screening;
    if (s == "single-strategy") return CohortPreset::SingleStrategy;
    if (s == "multi-strategy") return CohortPreset::MultiStrategy;
    return std::nullopt;
}

std::string_view to_string(CohortPreset p) {
    switch (p) {
        case CohortPreset::Screening: return "screening";
        case CohortPreset::SingleStrategy: return "single-strategy";
        case CohortPreset::MultiStrategy: return "multi-strategy";
    }
    return "screening";
}

NormalRange unknown_band(const NormalRange& ad, const NormalRange& cn) {
    std::array<double, 4> bounds = {ad.low, ad.high, cn.low, cn.high};
    std::sort(bounds.begin(), bounds.end());
    const double width = bounds[2] - bounds[1];
    return {bounds[1] - 0.05 * width, bounds[2] + 0.05 * width};
}

CohortSpec default_spec(CohortPreset preset) {
    CohortSpec spec;
    const auto& lit = literature_ranges();
    for (int i = 0; i < kIndicatorCount; ++i) {
        const auto& ad = lit.at(Category::AD, i).range;
        const auto& cn = lit.at(Category::CN, i).range;
        auto& ad_law = spec.laws[static_cast<int>(Category::AD)][i];
        auto& cn_law = spec.laws[static_cast<int>(Category::CN)][i];
        auto& un_law = spec.laws[static_cast<int>(Category::Unknown)][i];
        ad_law.lo = ad.low;
        ad_law.hi = ad.high;
        cn_law.lo = cn.low;
        cn_law.hi = cn.high;
        const auto band = unknown_band(ad, cn);
        un_law.lo = band.low;
        un_law.hi = band.high;
    }

    switch (preset) {
        case CohortPreset::Screening:
            spec.strategies = {{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}, 1.0}};
            break;
        case CohortPreset::SingleStrategy:
            spec.strategies = {{{0, 1, 2, 4, 6, 7, 8, 10, 12, 13}, 1.0}};
            break;
        case CohortPreset::MultiStrategy:
            spec.strategies = {
                {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}, 0.20},
                {{0, 1, 2, 3, 4, 5}, 0.10},
                {{6, 7, 8, 9, 10, 11, 12, 13}, 0.15},
                {{6, 10, 11}, 0.10},
                {{7, 8, 9, 10}, 0.10},
                {{0, 1, 6, 10, 11, 12, 13}, 0.10},
                {{2, 3, 4, 5, 10}, 0.10},
                {{10, 12, 13}, 0.05},
                {{0, 1, 2, 4, 6, 7, 8, 10, 12, 13}, 0.10},
            };
            break;
    }
    return spec;
}

Dataset generate_cohort(const CohortSpec& spec) {
    validate_spec(spec);
    Rng rng(spec.seed);
    Dataset out;
    out.records.reserve(spec.n_ad + spec.n_cn + spec.n_unknown);

    const std::array<std::pair<Category, int>, 3> blocks = {{
        {Category::AD, spec.n_ad},
        {Category::CN, spec.n_cn},
        {Category::Unknown, spec.n_unknown},
    }};
    for (const auto& [category, count] : blocks) {
        const auto& laws = spec.laws[static_cast<int>(category)];
        for (int i = 1; i <= count; ++i) {
            SubjectRecord rec;
            rec.subject_id = subject_id(category, i);
            rec.visit_id = "v1";
            rec.label = category;
            const Strategy& strategy = pick_strategy(spec.strategies, rng);
            for (int indicator : strategy.indicators) {
                rec.values[indicator] = sample_law(laws[indicator], rng);
            }
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace apmax
