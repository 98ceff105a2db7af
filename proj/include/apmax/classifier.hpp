// Closed-set diagnosis classifier over the 14 indicators: median
// imputation, mean/std normalization, then a 14 -> 32 -> 16 -> 2 network.
// Activations are pre-softmax scores ordered (AD, CN); any model exposing
// such a vector can drive the open-set layer.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "apmax/dataset.hpp"
#include "apmax/indicators.hpp"
#include "apmax/mlp.hpp"

namespace apmax {

struct ActivationVector {
    // Order (AD, CN), matching known_index.
    std::array<double, kKnownCategoryCount> v{};
};

struct TrainConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l2 = 1e-4;
    int batch_size = 32;
    int max_epochs = 500;
    // Stop after this many epochs without a validation accuracy improvement.
    int patience = 50;
    std::uint64_t seed = 0;
};

struct Normalization {
    std::array<double, kIndicatorCount> mean{};
    std::array<double, kIndicatorCount> stddev{};
    // Imputation constant for missing values, the training median.
    std::array<double, kIndicatorCount> median{};
};

struct ClassifierModel {
    Mlp net;
    Normalization norm;
    TrainConfig config;
};

// Adam on softmax cross-entropy plus L2, over the known-labeled records of
// `train`; the returned model is the checkpoint with the best validation
// accuracy (epoch 0 counts, so zero training epochs return the initialized
// net). Throws unless train has both known categories and val has at least
// one known-labeled record. Bit-reproducible given config.seed.
ClassifierModel train_classifier(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config);

// Imputed, normalized forward pass; pure.
ActivationVector activations(const ClassifierModel& m, const SubjectRecord& record);

std::array<double, kKnownCategoryCount> softmax(const ActivationVector& av);

// Fraction of known-labeled records whose argmax activation matches the
// label; ties go to the lower index. Throws if none are known-labeled.
double classifier_accuracy(const ClassifierModel& m, const Dataset& data);

nlohmann::json classifier_to_json(const ClassifierModel& m);
ClassifierModel classifier_from_json(const nlohmann::json& j);
void save_classifier(const ClassifierModel& m, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace apmax
