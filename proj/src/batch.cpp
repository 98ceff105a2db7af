#include "apmax/batch.hpp"

#include <stdexcept>
#include <string>

namespace apmax {

namespace {

OpenSetPrediction predict_one(const OpenApMaxModel& m, const SubjectRecord& rec,
                              PredictMethod method, double tau) {
    switch (method) {
        case PredictMethod::OpenApMax:
            return predict_openapmax(m, rec);
        case PredictMethod::OpenMax:
            return predict_openmax(*m.openmax, m.classifier, rec);
        case PredictMethod::SoftmaxThreshold:
            return predict_softmax_threshold(m.classifier, rec, tau);
    }
    throw std::logic_error("unreachable prediction method");
}

std::vector<OpenSetPrediction> run(const OpenApMaxModel& m, const Dataset& data,
                                   PredictMethod method, double tau, int threads) {
    if (method == PredictMethod::OpenMax && !m.openmax) {
        throw std::runtime_error("model bundle has no fitted activation baseline");
    }
    if (method == PredictMethod::SoftmaxThreshold &&
        (!(tau > 0.0) || !(tau < 1.0))) {
        throw std::invalid_argument("tau must be in (0, 1)");
    }

    std::vector<OpenSetPrediction> out(data.records.size());
    std::vector<std::string> errors(data.records.size());
    const auto one = [&](std::size_t i) {
        try {
            out[i] = predict_one(m, data.records[i], method, tau);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    const long n = static_cast<long>(data.records.size());
#ifdef _OPENMP
    if (threads > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
    } else
#else
    (void)threads;
#endif
    {
        for (long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
    }

    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            throw std::runtime_error("record " + data.records[i].subject_id + "/" +
                                     data.records[i].visit_id + ": " + errors[i]);
        }
    }
    return out;
}

}  // namespace

std::optional<PredictMethod> method_from_string(std::string_view s) {
    if (s == "openapmax") return PredictMethod::OpenApMax;
    if (s == "openmax") return PredictMethod::OpenMax;
    if (s == "softmax-threshold") return PredictMethod::SoftmaxThreshold;
    return std::nullopt;
}

std::string_view to_string(PredictMethod m) {
    switch (m) {
        case PredictMethod::OpenApMax: return "openapmax";
        case PredictMethod::OpenMax: return "openmax";
        case PredictMethod::SoftmaxThreshold: return "softmax-threshold";
    }
    return "openapmax";
}

std::vector<OpenSetPrediction> predict_batch(const OpenApMaxModel& m,
                                             const Dataset& data,
                                             PredictMethod method, double tau,
                                             int threads) {
    return run(m, data, method, tau, threads);
}

std::vector<OpenSetPrediction> predict_batch_serial(const OpenApMaxModel& m,
                                                    const Dataset& data,
                                                    PredictMethod method,
                                                    double tau) {
    return run(m, data, method, tau, 1);
}

}  // namespace apmax
