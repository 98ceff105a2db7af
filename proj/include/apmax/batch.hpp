// Batch prediction over a dataset. Single predictions are pure functions
// of immutable models, so records fan out across OpenMP threads; the
// serial path is kept as the reference the parallel one must match
// bit for bit.

#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "apmax/dataset.hpp"
#include "apmax/openset.hpp"

namespace apmax {

enum class PredictMethod { OpenApMax, OpenMax, SoftmaxThreshold };

std::optional<PredictMethod> method_from_string(std::string_view s);
std::string_view to_string(PredictMethod m);

// One prediction per record, in record order. OpenMax requires the bundle
// to carry the fitted baseline; SoftmaxThreshold uses tau (default 0.5).
std::vector<OpenSetPrediction> predict_batch(const OpenApMaxModel& m,
                                             const Dataset& data,
                                             PredictMethod method, double tau,
                                             int threads);

std::vector<OpenSetPrediction> predict_batch_serial(const OpenApMaxModel& m,
                                                    const Dataset& data,
                                                    PredictMethod method,
                                                    double tau);

}  // namespace apmax
