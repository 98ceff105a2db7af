// Benchmarks the two OpenMP kernels (batch prediction, bootstrap trials)
// against their serial reference paths and checks that outputs agree
// exactly, since both kernels are required to be schedule-independent.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "apmax/batch.hpp"
#include "apmax/classifier.hpp"
#include "apmax/eval.hpp"
#include "apmax/openset.hpp"
#include "apmax/pattern.hpp"
#include "apmax/synth.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel kernel benchmark"};
    int records = 2000;
    int threads = 4;
    int trials = 500;
    int repeats = 3;
    std::uint64_t seed = 1;
    app.add_option("--records", records, "cohort size to predict");
    app.add_option("--threads", threads, "parallel thread count");
    app.add_option("--trials", trials, "bootstrap trials");
    app.add_option("--repeats", repeats, "timing repeats (best is reported)");
    app.add_option("--seed", seed, "pipeline seed");
    CLI11_PARSE(app, argc, argv);

    try {
        apmax::CohortSpec spec = apmax::default_spec(apmax::CohortPreset::MultiStrategy);
        spec.n_ad = records * 2 / 5;
        spec.n_cn = records * 2 / 5;
        spec.n_unknown = records - spec.n_ad - spec.n_cn;
        spec.seed = seed;
        const auto cohort = apmax::generate_cohort(spec);
        const auto split = apmax::split_dataset(cohort, {}, seed);

        apmax::TrainConfig tc;
        tc.seed = seed;
        tc.max_epochs = 60;
        const auto classifier =
            apmax::train_classifier(split.train, split.validation, tc);
        const auto ranges = apmax::estimate_normal_ranges(
            split.train, apmax::guideline_overrides(), 20);
        apmax::OpenFitConfig oc;
        oc.seed = seed;
        const auto model = apmax::fit_openapmax(split.train, classifier, ranges, oc);

        std::cout << "predicting " << cohort.size() << " records, " << threads
                  << " threads vs serial\n";
        std::vector<apmax::OpenSetPrediction> serial_preds, parallel_preds;
        double serial_s = 1e300, parallel_s = 1e300;
        for (int r = 0; r < repeats; ++r) {
            auto t0 = Clock::now();
            serial_preds = apmax::predict_batch_serial(
                model, cohort, apmax::PredictMethod::OpenApMax, 0.5);
            serial_s = std::min(serial_s, seconds_since(t0));
            t0 = Clock::now();
            parallel_preds = apmax::predict_batch(
                model, cohort, apmax::PredictMethod::OpenApMax, 0.5, threads);
            parallel_s = std::min(parallel_s, seconds_since(t0));
        }
        bool identical = serial_preds.size() == parallel_preds.size();
        for (std::size_t i = 0; identical && i < serial_preds.size(); ++i) {
            identical = serial_preds[i].probs == parallel_preds[i].probs &&
                        serial_preds[i].distances == parallel_preds[i].distances &&
                        serial_preds[i].decision == parallel_preds[i].decision;
        }
        std::cout << "  serial   " << serial_s << " s\n"
                  << "  parallel " << parallel_s << " s  (speedup "
                  << serial_s / parallel_s << "x)\n"
                  << "  outputs identical: " << (identical ? "yes" : "NO") << '\n';

        std::vector<apmax::Category> decisions(serial_preds.size());
        for (std::size_t i = 0; i < serial_preds.size(); ++i) {
            decisions[i] = serial_preds[i].decision;
        }
        std::vector<apmax::Category> truth(cohort.size());
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            truth[i] = *cohort.records[i].label;
        }
        const auto metric = [&](std::span<const std::size_t> idx) {
            std::vector<apmax::Category> d(idx.size()), t(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                d[i] = decisions[idx[i]];
                t[i] = truth[idx[i]];
            }
            return apmax::sensitivity(d, t, apmax::Category::Unknown);
        };
        apmax::BootstrapConfig bc;
        bc.trials = trials;
        bc.seed = seed;
        bc.threads = threads;

        std::cout << "bootstrap with " << trials << " trials, " << threads
                  << " threads vs serial\n";
        std::pair<double, double> serial_ci, parallel_ci;
        serial_s = parallel_s = 1e300;
        for (int r = 0; r < repeats; ++r) {
            auto t0 = Clock::now();
            serial_ci = apmax::bootstrap_ci_serial(metric, cohort.size(), bc);
            serial_s = std::min(serial_s, seconds_since(t0));
            t0 = Clock::now();
            parallel_ci = apmax::bootstrap_ci(metric, cohort.size(), bc);
            parallel_s = std::min(parallel_s, seconds_since(t0));
        }
        std::cout << "  serial   " << serial_s << " s\n"
                  << "  parallel " << parallel_s << " s  (speedup "
                  << serial_s / parallel_s << "x)\n"
                  << "  intervals identical: "
                  << (serial_ci == parallel_ci ? "yes" : "NO") << '\n';
        return serial_ci == parallel_ci && identical ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
