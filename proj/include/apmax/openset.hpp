// Abnormal-pattern open-set recognition: fitting per-category cluster
// centers, tail models and distance thresholds over correctly-classified
// training records, then revising classifier activations into a
// (Unknown, AD, CN) probability vector. Includes two baselines: activation-
// space revision against mean activation vectors, and plain softmax with a
// confidence threshold.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "apmax/classifier.hpp"
#include "apmax/dataset.hpp"
#include "apmax/evt.hpp"
#include "apmax/kmeans.hpp"
#include "apmax/pattern.hpp"

namespace apmax {

// The revision multiplier for the class at descending rank i (1-based) of
// the activation sort. AsPrinted uses (alpha-i)/alpha, so the top class
// gets (alpha-1)/alpha; ClassicOpenMax uses (alpha-i+1)/alpha.
enum class RankFactor { AsPrinted, ClassicOpenMax };

std::string_view to_string(RankFactor f);
std::optional<RankFactor> rank_factor_from_string(std::string_view s);

struct CategoryModel {
    Category category = Category::AD;
    ClusterCenters centers;
    WeibullTailModel weibull;
    // Q-quantile of the training combined distances; drives the flag-F
    // correction at prediction time.
    double threshold = 0.0;
    double quantile = 0.95;
};

struct OpenMaxModel {
    struct PerCategory {
        // Mean activation vector over correctly-classified training records.
        std::array<double, kKnownCategoryCount> mav{};
        WeibullTailModel weibull;
    };
    std::array<PerCategory, kKnownCategoryCount> categories;
    int alpha = kKnownCategoryCount;
    RankFactor rank_factor = RankFactor::AsPrinted;
};

struct OpenApMaxModel {
    std::array<CategoryModel, kKnownCategoryCount> categories;
    int alpha = kKnownCategoryCount;
    bool flag_f = true;
    RankFactor rank_factor = RankFactor::AsPrinted;
    RangeTable ranges;
    ClassifierModel classifier;
    // Path the model bundle records for the classifier weights file.
    std::string classifier_file;
    std::optional<OpenMaxModel> openmax;
};

struct OpenSetPrediction {
    // Order (Unknown, AD, CN), matching Category values.
    std::array<double, kKnownCategoryCount + 1> probs{};
    std::array<double, kKnownCategoryCount> distances{};
    // Revision multiplier per known class; 1 when unrevised.
    std::array<double, kKnownCategoryCount> omega{};
    Category decision = Category::Unknown;
};

// sqrt(d_own^2 + (1 - d_other)^2) where d_own / d_other are minimum
// distances to the own and to the pooled other-category centers. Applied
// verbatim even when d_other exceeds 1.
double combined_distance(const AbnormalPattern& x, const ClusterCenters& own,
                         const ClusterCenters& others);

// The shared revision arithmetic. Ranks the activations descending (ties
// keep the lower class index first), damps the top `alpha` classes by
// their own w_score, collects the removed mass as the unknown activation,
// and takes a softmax over (unknown, revised known). When `thresholds` is
// set, each known probability is scaled by 1 - clamp((dist-Thr)/Thr, 0, 1)
// and the unknown probability absorbs the remainder, so any class at
// dist >= 2*Thr ends at exactly zero. The result is always a simplex.
struct RevisionResult {
    std::array<double, kKnownCategoryCount + 1> probs{};
    std::array<double, kKnownCategoryCount> omega{};
};
RevisionResult revise_probabilities(
    const std::array<double, kKnownCategoryCount>& v,
    const std::array<double, kKnownCategoryCount>& wscore,
    const std::array<double, kKnownCategoryCount>& dist,
    const std::optional<std::array<double, kKnownCategoryCount>>& thresholds,
    int alpha, RankFactor factor);

struct OpenFitConfig {
    std::array<int, kKnownCategoryCount> n_centers = {3, 3};
    std::array<double, kKnownCategoryCount> quantiles = {0.95, 0.95};
    // Per-category tail size; defaults to min(20, ceil(n/2)) of that
    // category's distance sample.
    std::optional<int> tail_size;
    int alpha = kKnownCategoryCount;
    bool flag_f = true;
    RankFactor rank_factor = RankFactor::AsPrinted;
    int batch_size = 256;
    int iterations = 100;
    std::uint64_t seed = 0;
    // Also fit the activation-space baseline on the same records.
    bool fit_openmax_baseline = true;
};

// Per known category: binarize the correctly-classified training records,
// cluster them, and fit the tail model and threshold on their combined
// distances. Throws if a category has no correctly-classified records.
OpenApMaxModel fit_openapmax(const Dataset& train, const ClassifierModel& classifier,
                             const RangeTable& ranges, const OpenFitConfig& config);

// Pure cores taking precomputed pattern/activations, and record-level
// wrappers that derive them from the model's ranges and classifier.
OpenSetPrediction predict_openapmax_from(const OpenApMaxModel& m,
                                         const AbnormalPattern& x,
                                         const ActivationVector& v);
OpenSetPrediction predict_openapmax(const OpenApMaxModel& m,
                                    const SubjectRecord& record);
OpenSetPrediction predict_openmax_from(const OpenMaxModel& b,
                                       const ActivationVector& v);
OpenSetPrediction predict_openmax(const OpenMaxModel& b,
                                  const ClassifierModel& classifier,
                                  const SubjectRecord& record);

// Softmax over the known classes; decision is Unknown when the maximum
// probability falls below tau, else the argmax class. The probability
// vector keeps the raw softmax with zero unknown mass. Requires tau in (0,1).
OpenSetPrediction predict_softmax_threshold(const ClassifierModel& c,
                                            const SubjectRecord& record,
                                            double tau);

// Largest tau in {0.50, 0.51, ..., 0.99} maximizing decision accuracy over
// the labeled records of `val`. Throws if none are labeled.
double tune_tau(const ClassifierModel& c, const Dataset& val);

nlohmann::json openapmax_to_json(const OpenApMaxModel& m);
// The bundle references the classifier weights file rather than embedding
// it, so deserialization takes the separately loaded classifier.
OpenApMaxModel openapmax_from_json(const nlohmann::json& j,
                                   ClassifierModel classifier);
void save_openapmax(const OpenApMaxModel& m, const std::filesystem::path& path);
// Resolves classifier_file against the current directory, then against the
// bundle's parent directory.
OpenApMaxModel load_openapmax(const std::filesystem::path& path);

}  // namespace apmax
