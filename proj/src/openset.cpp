#include "apmax/openset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "apmax/rng.hpp"
#include "apmax/stats.hpp"

namespace apmax {

namespace {

using nlohmann::json;

constexpr int kL = kKnownCategoryCount;

int argmax_known(const std::array<double, kL>& v) {
    int best = 0;
    for (int i = 1; i < kL; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

Category decide(const std::array<double, kL + 1>& probs) {
    int best = 0;
    for (int i = 1; i <= kL; ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<Category>(best);
}

// Correctly-classified training records of each known category, as indices
// into train.records.
std::array<std::vector<std::size_t>, kL> correctly_classified(
    const Dataset& train, const ClassifierModel& classifier) {
    std::array<std::vector<std::size_t>, kL> picked;
    for (std::size_t r = 0; r < train.records.size(); ++r) {
        const auto& rec = train.records[r];
        if (!rec.label || *rec.label == Category::Unknown) continue;
        const int truth = known_index(*rec.label);
        const auto av = activations(classifier, rec);
        if (argmax_known(av.v) == truth) picked[truth].push_back(r);
    }
    for (int i = 0; i < kL; ++i) {
        if (picked[i].empty()) {
            throw std::runtime_error(
                "category " + std::string(to_string(known_category_at(i))) +
                " has no correctly classified training records");
        }
    }
    return picked;
}

json cluster_centers_to_json(const ClusterCenters& c) {
    json centers = json::array();
    for (const auto& center : c.centers) centers.push_back(center);
    return {{"n_centers", c.k()}, {"centers", std::move(centers)},
            {"inertia", c.inertia}};
}

ClusterCenters cluster_centers_from_json(const json& j) {
    ClusterCenters c;
    for (const auto& center : j.at("centers")) {
        auto v = center.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != kPatternDim) {
            throw std::runtime_error("center dimension mismatch");
        }
        c.centers.push_back(std::move(v));
    }
    if (c.centers.empty() || j.at("n_centers").get<int>() != c.k()) {
        throw std::runtime_error("center count mismatch");
    }
    c.inertia = j.at("inertia").get<double>();
    return c;
}

}  // namespace

std::string_view to_string(RankFactor f) {
    return f == RankFactor::AsPrinted ? "as-printed" : "openmax";
}

std::optional<RankFactor> rank_factor_from_string(std::string_view s) {
    if (s == "as-printed") return RankFactor::AsPrinted;
    if (s == "openmax") return RankFactor::ClassicOpenMax;
    return std::nullopt;
}

double combined_distance(const AbnormalPattern& x, const ClusterCenters& own,
                         const ClusterCenters& others) {
    const double d_own = min_distance_to_centers(x, own);
    const double d_other = min_distance_to_centers(x, others);
    return std::sqrt(d_own * d_own + (1.0 - d_other) * (1.0 - d_other));
}

RevisionResult revise_probabilities(
    const std::array<double, kL>& v, const std::array<double, kL>& wscore,
    const std::array<double, kL>& dist,
    const std::optional<std::array<double, kL>>& thresholds, int alpha,
    RankFactor factor) {
    if (alpha < 1 || alpha > kL) {
        throw std::invalid_argument("alpha must be in [1, " + std::to_string(kL) +
                                    "]");
    }

    // Descending sort of the activations; ties keep the lower class index.
    std::array<int, kL> order{};
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return v[a] > v[b]; });

    RevisionResult out;
    out.omega.fill(1.0);
    for (int rank = 1; rank <= alpha; ++rank) {
        const int cls = order[rank - 1];
        const double numer = factor == RankFactor::AsPrinted
                                 ? static_cast<double>(alpha - rank)
                                 : static_cast<double>(alpha - rank + 1);
        out.omega[cls] = 1.0 - (numer / alpha) * wscore[cls];
    }

    // Activation mass removed from the known classes becomes the unknown
    // class's activation.
    std::array<double, kL + 1> scores{};
    double v0 = 0.0;
    for (int i = 0; i < kL; ++i) {
        scores[i + 1] = v[i] * out.omega[i];
        v0 += v[i] * (1.0 - out.omega[i]);
    }
    scores[0] = v0;

    const auto p = softmax(std::span<const double>(scores.data(), scores.size()));
    std::copy(p.begin(), p.end(), out.probs.begin());

    if (thresholds) {
        double known_mass = 0.0;
        for (int i = 0; i < kL; ++i) {
            const double thr = (*thresholds)[i];
            double abnormal;
            if (thr > 0.0) {
                abnormal = std::clamp((dist[i] - thr) / thr, 0.0, 1.0);
            } else {
                // A zero threshold marks any positive distance fully abnormal.
                abnormal = dist[i] > 0.0 ? 1.0 : 0.0;
            }
            out.probs[i + 1] *= 1.0 - abnormal;
            known_mass += out.probs[i + 1];
        }
        out.probs[0] = 1.0 - known_mass;
    }
    return out;
}

OpenApMaxModel fit_openapmax(const Dataset& train, const ClassifierModel& classifier,
                             const RangeTable& ranges, const OpenFitConfig& config) {
    for (int i = 0; i < kL; ++i) {
        if (!(config.quantiles[i] > 0.0) || config.quantiles[i] > 1.0) {
            throw std::invalid_argument("quantile must be in (0, 1]");
        }
    }
    if (config.alpha < 1 || config.alpha > kL) {
        throw std::invalid_argument("alpha must be in [1, " + std::to_string(kL) +
                                    "]");
    }

    const auto picked = correctly_classified(train, classifier);

    OpenApMaxModel model;
    model.alpha = config.alpha;
    model.flag_f = config.flag_f;
    model.rank_factor = config.rank_factor;
    model.ranges = ranges;
    model.classifier = classifier;

    std::array<std::vector<AbnormalPattern>, kL> patterns;
    for (int i = 0; i < kL; ++i) {
        patterns[i].reserve(picked[i].size());
        for (std::size_t r : picked[i]) {
            patterns[i].push_back(binarize(train.records[r], ranges));
        }
        KMeansConfig km;
        km.k = config.n_centers[i];
        km.batch_size = config.batch_size;
        km.iterations = config.iterations;
        km.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
        model.categories[i].category = known_category_at(i);
        model.categories[i].centers = fit_minibatch_kmeans(patterns[i], km);
        model.categories[i].quantile = config.quantiles[i];
    }

    for (int i = 0; i < kL; ++i) {
        const auto& own = model.categories[i].centers;
        const auto& others = model.categories[1 - i].centers;
        std::vector<double> dist;
        dist.reserve(patterns[i].size());
        for (const auto& x : patterns[i]) {
            dist.push_back(combined_distance(x, own, others));
        }
        const int tail =
            config.tail_size ? *config.tail_size : default_tail_size(dist.size());
        model.categories[i].weibull = fit_weibull_tail(dist, tail);
        model.categories[i].threshold = quantile(dist, config.quantiles[i]);
    }

    if (config.fit_openmax_baseline) {
        OpenMaxModel baseline;
        baseline.alpha = config.alpha;
        baseline.rank_factor = config.rank_factor;
        for (int i = 0; i < kL; ++i) {
            std::vector<ActivationVector> avs;
            avs.reserve(picked[i].size());
            for (std::size_t r : picked[i]) {
                avs.push_back(activations(classifier, train.records[r]));
            }
            auto& cat = baseline.categories[i];
            cat.mav.fill(0.0);
            for (const auto& av : avs) {
                for (int d = 0; d < kL; ++d) cat.mav[d] += av.v[d];
            }
            for (int d = 0; d < kL; ++d) {
                cat.mav[d] /= static_cast<double>(avs.size());
            }
            std::vector<double> dist;
            dist.reserve(avs.size());
            for (const auto& av : avs) {
                double sq = 0.0;
                for (int d = 0; d < kL; ++d) {
                    sq += (av.v[d] - cat.mav[d]) * (av.v[d] - cat.mav[d]);
                }
                dist.push_back(std::sqrt(sq));
            }
            const int tail = config.tail_size ? *config.tail_size
                                              : default_tail_size(dist.size());
            cat.weibull = fit_weibull_tail(dist, tail);
        }
        model.openmax = std::move(baseline);
    }
    return model;
}

OpenSetPrediction predict_openapmax_from(const OpenApMaxModel& m,
                                         const AbnormalPattern& x,
                                         const ActivationVector& v) {
    OpenSetPrediction pred;
    std::array<double, kL> wscore{};
    for (int i = 0; i < kL; ++i) {
        pred.distances[i] = combined_distance(x, m.categories[i].centers,
                                              m.categories[1 - i].centers);
        wscore[i] = w_score(m.categories[i].weibull, pred.distances[i]);
    }
    std::optional<std::array<double, kL>> thresholds;
    if (m.flag_f) {
        thresholds.emplace();
        for (int i = 0; i < kL; ++i) {
            (*thresholds)[i] = m.categories[i].threshold;
        }
    }
    const auto rev = revise_probabilities(v.v, wscore, pred.distances, thresholds,
                                          m.alpha, m.rank_factor);
    pred.probs = rev.probs;
    pred.omega = rev.omega;
    pred.decision = decide(pred.probs);
    return pred;
}

OpenSetPrediction predict_openapmax(const OpenApMaxModel& m,
                                    const SubjectRecord& record) {
    return predict_openapmax_from(m, binarize(record, m.ranges),
                                  activations(m.classifier, record));
}

OpenSetPrediction predict_openmax_from(const OpenMaxModel& b,
                                       const ActivationVector& v) {
    OpenSetPrediction pred;
    std::array<double, kL> wscore{};
    for (int i = 0; i < kL; ++i) {
        double sq = 0.0;
        for (int d = 0; d < kL; ++d) {
            sq += (v.v[d] - b.categories[i].mav[d]) * (v.v[d] - b.categories[i].mav[d]);
        }
        pred.distances[i] = std::sqrt(sq);
        wscore[i] = w_score(b.categories[i].weibull, pred.distances[i]);
    }
    const auto rev = revise_probabilities(v.v, wscore, pred.distances, std::nullopt,
                                          b.alpha, b.rank_factor);
    pred.probs = rev.probs;
    pred.omega = rev.omega;
    pred.decision = decide(pred.probs);
    return pred;
}

OpenSetPrediction predict_openmax(const OpenMaxModel& b,
                                  const ClassifierModel& classifier,
                                  const SubjectRecord& record) {
    return predict_openmax_from(b, activations(classifier, record));
}

OpenSetPrediction predict_softmax_threshold(const ClassifierModel& c,
                                            const SubjectRecord& record,
                                            double tau) {
    if (!(tau > 0.0) || !(tau < 1.0)) {
        throw std::invalid_argument("tau must be in (0, 1)");
    }
    const auto av = activations(c, record);
    const auto p = softmax(av);
    OpenSetPrediction pred;
    pred.omega.fill(1.0);
    for (int i = 0; i < kL; ++i) pred.probs[i + 1] = p[i];
    const int best = static_cast<int>(
        std::max_element(p.begin(), p.end()) - p.begin());
    pred.decision = p[best] < tau ? Category::Unknown : known_category_at(best);
    return pred;
}

double tune_tau(const ClassifierModel& c, const Dataset& val) {
    struct Entry {
        double confidence;
        Category argmax;
        Category label;
    };
    std::vector<Entry> entries;
    for (const auto& rec : val.records) {
        if (!rec.label) continue;
        const auto p = softmax(activations(c, rec));
        const int best = static_cast<int>(
            std::max_element(p.begin(), p.end()) - p.begin());
        entries.push_back({p[best], known_category_at(best), *rec.label});
    }
    if (entries.empty()) {
        throw std::invalid_argument("tau tuning needs labeled records");
    }

    double best_tau = 0.5;
    int best_hits = -1;
    for (int step = 0; step < 50; ++step) {
        const double tau = 0.5 + 0.01 * step;
        int hits = 0;
        for (const auto& e : entries) {
            const Category decision =
                e.confidence < tau ? Category::Unknown : e.argmax;
            if (decision == e.label) ++hits;
        }
        // Ties prefer the larger tau: equally accurate but more willing to
        // reject off-distribution records.
        if (hits >= best_hits) {
            best_hits = hits;
            best_tau = tau;
        }
    }
    return best_tau;
}

json openapmax_to_json(const OpenApMaxModel& m) {
    json j;
    j["format_version"] = 1;
    j["kind"] = "openapmax-model";
    j["alpha"] = m.alpha;
    j["flag_f"] = m.flag_f;
    j["rank_factor"] = std::string(to_string(m.rank_factor));
    j["classifier_file"] = m.classifier_file;
    j["ranges"] = range_table_to_json(m.ranges);
    json cats;
    for (int i = 0; i < kL; ++i) {
        const auto& c = m.categories[i];
        json cat = cluster_centers_to_json(c.centers);
        cat["weibull"] = weibull_to_json(c.weibull);
        cat["threshold"] = c.threshold;
        cat["quantile"] = c.quantile;
        cats[std::string(to_string(known_category_at(i)))] = std::move(cat);
    }
    j["categories"] = std::move(cats);
    if (m.openmax) {
        json b;
        b["alpha"] = m.openmax->alpha;
        b["rank_factor"] = std::string(to_string(m.openmax->rank_factor));
        json bcats;
        for (int i = 0; i < kL; ++i) {
            const auto& c = m.openmax->categories[i];
            bcats[std::string(to_string(known_category_at(i)))] = {
                {"mav", c.mav}, {"weibull", weibull_to_json(c.weibull)}};
        }
        b["categories"] = std::move(bcats);
        j["openmax"] = std::move(b);
    }
    return j;
}

OpenApMaxModel openapmax_from_json(const json& j, ClassifierModel classifier) {
    if (j.at("kind").get<std::string>() != "openapmax-model") {
        throw std::runtime_error("expected kind 'openapmax-model'");
    }
    OpenApMaxModel m;
    m.alpha = j.at("alpha").get<int>();
    m.flag_f = j.at("flag_f").get<bool>();
    const auto factor =
        rank_factor_from_string(j.at("rank_factor").get<std::string>());
    if (!factor) throw std::runtime_error("unknown rank_factor");
    m.rank_factor = *factor;
    m.classifier_file = j.at("classifier_file").get<std::string>();
    m.ranges = range_table_from_json(j.at("ranges"));
    m.classifier = std::move(classifier);
    for (int i = 0; i < kL; ++i) {
        const auto key = std::string(to_string(known_category_at(i)));
        const json& cat = j.at("categories").at(key);
        auto& c = m.categories[i];
        c.category = known_category_at(i);
        c.centers = cluster_centers_from_json(cat);
        c.weibull = weibull_from_json(cat.at("weibull"));
        c.threshold = cat.at("threshold").get<double>();
        c.quantile = cat.at("quantile").get<double>();
        if (c.threshold < 0.0 || !(c.quantile > 0.0) || c.quantile > 1.0) {
            throw std::runtime_error("invalid threshold or quantile");
        }
    }
    if (m.alpha < 1 || m.alpha > kL) throw std::runtime_error("invalid alpha");
    if (j.contains("openmax")) {
        OpenMaxModel b;
        const json& bj = j.at("openmax");
        b.alpha = bj.at("alpha").get<int>();
        const auto bf =
            rank_factor_from_string(bj.at("rank_factor").get<std::string>());
        if (!bf) throw std::runtime_error("unknown rank_factor");
        b.rank_factor = *bf;
        for (int i = 0; i < kL; ++i) {
            const auto key = std::string(to_string(known_category_at(i)));
            const json& cat = bj.at("categories").at(key);
            b.categories[i].mav =
                cat.at("mav").get<std::array<double, kKnownCategoryCount>>();
            b.categories[i].weibull = weibull_from_json(cat.at("weibull"));
        }
        m.openmax = std::move(b);
    }
    return m;
}

void save_openapmax(const OpenApMaxModel& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << openapmax_to_json(m).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

OpenApMaxModel load_openapmax(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
    }
    const auto file = j.at("classifier_file").get<std::string>();
    std::filesystem::path classifier_path = file;
    if (!std::filesystem::exists(classifier_path)) {
        classifier_path = path.parent_path() / file;
    }
    return openapmax_from_json(j, load_classifier(classifier_path));
}

}  // namespace apmax
