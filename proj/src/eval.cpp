#include "apmax/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "apmax/rng.hpp"
#include "apmax/stats.hpp"

namespace apmax {

namespace {

using nlohmann::json;

std::vector<double> resample_metric_values(
    const std::function<double(std::span<const std::size_t>)>& metric,
    std::size_t n, const BootstrapConfig& config, bool parallel) {
    if (n == 0) throw std::invalid_argument("bootstrap needs a nonempty sample");
    if (config.resample_n < 1 || config.trials < 1) {
        throw std::invalid_argument("bootstrap needs positive resample_n and trials");
    }

    std::vector<double> values(config.trials);
    std::vector<std::string> errors(config.trials);

    // Each iteration touches only its own slots, so the loop body is safe
    // at any thread count and the values are independent of scheduling.
    const auto run_trial = [&](int t) {
        try {
            Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
            std::vector<std::size_t> indices(config.resample_n);
            for (int attempt = 0;; ++attempt) {
                for (auto& idx : indices) idx = rng.uniform_index(n);
                try {
                    values[t] = metric(indices);
                    break;
                } catch (const MetricUndefined&) {
                    if (attempt + 1 >= 10) {
                        throw std::runtime_error(
                            "metric undefined after 10 redraws in bootstrap trial " +
                            std::to_string(t));
                    }
                }
            }
        } catch (const std::exception& e) {
            errors[t] = e.what();
        }
    };

#ifdef _OPENMP
    if (parallel && config.threads > 1) {
#pragma omp parallel for schedule(static) num_threads(config.threads)
        for (int t = 0; t < config.trials; ++t) run_trial(t);
    } else
#else
    (void)parallel;
#endif
    {
        for (int t = 0; t < config.trials; ++t) run_trial(t);
    }

    for (const auto& e : errors) {
        if (!e.empty()) throw std::runtime_error(e);
    }
    return values;
}

std::pair<double, double> percentile_pair(std::vector<double> values,
                                          const BootstrapConfig& config) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, config.lo_percentile / 100.0),
            quantile_sorted(values, config.hi_percentile / 100.0)};
}

constexpr const char* kClassNames[3] = {"Unknown", "AD", "CN"};

}  // namespace

double auc_ovr(std::span<const std::pair<double, bool>> scored) {
    std::vector<std::pair<double, bool>> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::int64_t n_pos = 0, n_neg = 0;
    for (const auto& [score, positive] : sorted) (positive ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) {
        throw MetricUndefined("AUC needs both positive and negative examples");
    }

    // Walk tie groups in ascending score order; a positive beats every
    // negative strictly below its group and halves against its own group.
    std::int64_t wins2 = 0;
    std::int64_t neg_below = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        std::int64_t group_pos = 0, group_neg = 0;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            (sorted[j].second ? group_pos : group_neg) += 1;
            ++j;
        }
        wins2 += 2 * group_pos * neg_below + group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }
    return static_cast<double>(wins2) / static_cast<double>(2 * n_pos * n_neg);
}

double sensitivity(std::span<const Category> decisions,
                   std::span<const Category> truth, Category cls) {
    if (decisions.size() != truth.size()) {
        throw std::invalid_argument("decisions and truth must align");
    }
    std::size_t in_class = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != cls) continue;
        ++in_class;
        if (decisions[i] == cls) ++correct;
    }
    if (in_class == 0) {
        throw MetricUndefined("class " + std::string(to_string(cls)) +
                              " absent from truth");
    }
    return static_cast<double>(correct) / static_cast<double>(in_class);
}

std::pair<double, double> bootstrap_ci(
    const std::function<double(std::span<const std::size_t>)>& metric,
    std::size_t n, const BootstrapConfig& config) {
    return percentile_pair(resample_metric_values(metric, n, config, true), config);
}

std::pair<double, double> bootstrap_ci_serial(
    const std::function<double(std::span<const std::size_t>)>& metric,
    std::size_t n, const BootstrapConfig& config) {
    return percentile_pair(resample_metric_values(metric, n, config, false), config);
}

EvalReport evaluate(std::span<const PredictedRow> preds,
                    std::span<const Category> truth,
                    const BootstrapConfig& config) {
    if (preds.size() != truth.size()) {
        throw std::invalid_argument("predictions and truth must align");
    }
    if (preds.empty()) throw std::invalid_argument("evaluate needs records");

    EvalReport report;
    report.n = preds.size();
    report.bootstrap = config;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        report.confusion[static_cast<int>(truth[i])]
                        [static_cast<int>(preds[i].decision)] += 1;
    }

    std::vector<Category> decisions(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        decisions[i] = preds[i].decision;
    }

    // Child seed per metric, fixed by class: sensitivity uses the category
    // value, AUC the category value offset past the sensitivity block.
    const auto child = [&](std::uint64_t index) {
        BootstrapConfig c = config;
        c.seed = derive_seed(config.seed, index);
        return c;
    };

    for (int cls = 0; cls < 3; ++cls) {
        const Category category = static_cast<Category>(cls);
        bool present = false;
        for (Category t : truth) present = present || (t == category);
        if (!present) continue;
        MetricWithCi m;
        m.value = sensitivity(decisions, truth, category);
        const auto ci = bootstrap_ci(
            [&](std::span<const std::size_t> idx) {
                std::vector<Category> d(idx.size()), t(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    d[i] = decisions[idx[i]];
                    t[i] = truth[idx[i]];
                }
                return sensitivity(d, t, category);
            },
            preds.size(), child(static_cast<std::uint64_t>(cls)));
        m.lo = ci.first;
        m.hi = ci.second;
        report.sensitivity[category] = m;
    }

    for (Category category : known_categories()) {
        const int cls = static_cast<int>(category);
        std::vector<std::pair<double, bool>> scored(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            scored[i] = {preds[i].probs[cls], truth[i] == category};
        }
        bool has_pos = false, has_neg = false;
        for (const auto& [score, positive] : scored) {
            (positive ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        MetricWithCi m;
        m.value = auc_ovr(scored);
        const auto ci = bootstrap_ci(
            [&](std::span<const std::size_t> idx) {
                std::vector<std::pair<double, bool>> sample(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    sample[i] = scored[idx[i]];
                }
                return auc_ovr(sample);
            },
            preds.size(), child(static_cast<std::uint64_t>(3 + cls)));
        m.lo = ci.first;
        m.hi = ci.second;
        report.auc[category] = m;
    }
    return report;
}

json eval_report_to_json(const EvalReport& report) {
    json j;
    j["format_version"] = 1;
    j["kind"] = "eval-report";
    j["n"] = report.n;

    json confusion;
    for (int t = 0; t < 3; ++t) {
        json row;
        for (int d = 0; d < 3; ++d) row[kClassNames[d]] = report.confusion[t][d];
        confusion[kClassNames[t]] = std::move(row);
    }
    j["confusion"] = std::move(confusion);

    const auto metric_block = [](const std::map<Category, MetricWithCi>& metrics) {
        json block = json::object();
        for (const auto& [category, m] : metrics) {
            block[std::string(to_string(category))] = {
                {"value", m.value}, {"ci_lo", m.lo}, {"ci_hi", m.hi}};
        }
        return block;
    };
    j["sensitivity"] = metric_block(report.sensitivity);
    j["auc"] = metric_block(report.auc);

    j["bootstrap"] = {{"resample_n", report.bootstrap.resample_n},
                      {"trials", report.bootstrap.trials},
                      {"lo_percentile", report.bootstrap.lo_percentile},
                      {"hi_percentile", report.bootstrap.hi_percentile},
                      {"seed", report.bootstrap.seed},
                      {"threads", report.bootstrap.threads}};
    return j;
}

}  // namespace apmax
