#include "apmax/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "apmax/stats.hpp"

namespace apmax {

namespace {

using nlohmann::json;

constexpr std::array<int, 4> kArchitecture = {kIndicatorCount, 32, 16,
                                              kKnownCategoryCount};

std::vector<double> normalized_input(const SubjectRecord& record,
                                     const Normalization& norm) {
    std::vector<double> x(kIndicatorCount);
    for (int i = 0; i < kIndicatorCount; ++i) {
        const double raw = record.values[i] ? *record.values[i] : norm.median[i];
        x[i] = (raw - norm.mean[i]) / norm.stddev[i];
    }
    return x;
}

// Known-labeled records as (normalized input, known_index) pairs.
void collect_known(const Dataset& data, const Normalization& norm,
                   std::vector<std::vector<double>>& inputs,
                   std::vector<int>& labels) {
    for (const auto& rec : data.records) {
        if (!rec.label || *rec.label == Category::Unknown) continue;
        inputs.push_back(normalized_input(rec, norm));
        labels.push_back(known_index(*rec.label));
    }
}

double accuracy_on(const Mlp& net, const std::vector<std::vector<double>>& inputs,
                   const std::vector<int>& labels) {
    int hits = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto out = mlp_forward(net, inputs[i]);
        const int pred = static_cast<int>(
            std::max_element(out.begin(), out.end()) - out.begin());
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(inputs.size());
}

Normalization fit_normalization(const Dataset& train) {
    Normalization norm;
    for (int i = 0; i < kIndicatorCount; ++i) {
        std::vector<double> observed;
        for (const auto& rec : train.records) {
            if (!rec.label || *rec.label == Category::Unknown) continue;
            if (rec.values[i]) observed.push_back(*rec.values[i]);
        }
        // An entirely unobserved indicator imputes and centers at zero.
        norm.median[i] = observed.empty() ? 0.0 : quantile(observed, 0.5);

        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& rec : train.records) {
            if (!rec.label || *rec.label == Category::Unknown) continue;
            sum += rec.values[i] ? *rec.values[i] : norm.median[i];
            ++n;
        }
        norm.mean[i] = sum / static_cast<double>(n);
        double sq = 0.0;
        for (const auto& rec : train.records) {
            if (!rec.label || *rec.label == Category::Unknown) continue;
            const double v = rec.values[i] ? *rec.values[i] : norm.median[i];
            sq += (v - norm.mean[i]) * (v - norm.mean[i]);
        }
        const double sd = std::sqrt(sq / static_cast<double>(n));
        norm.stddev[i] = sd > 0.0 ? sd : 1.0;
    }
    return norm;
}

}  // namespace

ClassifierModel train_classifier(const Dataset& train, const Dataset& val,
                                 const TrainConfig& config) {
    bool has_ad = false, has_cn = false;
    for (const auto& rec : train.records) {
        has_ad = has_ad || rec.label == Category::AD;
        has_cn = has_cn || rec.label == Category::CN;
    }
    if (!has_ad || !has_cn) {
        throw std::invalid_argument("training set needs both known categories");
    }
    if (config.batch_size < 1 || config.max_epochs < 0 || config.patience < 1) {
        throw std::invalid_argument("invalid training configuration");
    }

    ClassifierModel model;
    model.config = config;
    model.norm = fit_normalization(train);

    std::vector<std::vector<double>> train_x, val_x;
    std::vector<int> train_y, val_y;
    collect_known(train, model.norm, train_x, train_y);
    collect_known(val, model.norm, val_x, val_y);
    if (val_x.empty()) {
        throw std::invalid_argument(
            "validation set needs at least one known-category record");
    }

    Rng rng(config.seed);
    model.net = make_mlp({kArchitecture.begin(), kArchitecture.end()}, rng);

    Mlp best_net = model.net;
    double best_acc = accuracy_on(model.net, val_x, val_y);
    int since_improvement = 0;

    auto grads = make_gradients(model.net);
    auto adam = make_adam_state(model.net);
    std::vector<std::size_t> order(train_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::vector<double>> batch_x;
    std::vector<int> batch_y;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + config.batch_size);
            batch_x.clear();
            batch_y.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch_x.push_back(train_x[order[i]]);
                batch_y.push_back(train_y[order[i]]);
            }
            mlp_loss_and_gradients(model.net, batch_x, batch_y, config.l2, grads);
            adam_step(model.net, grads, adam, config.learning_rate, config.beta1,
                      config.beta2, config.eps);
        }
        const double acc = accuracy_on(model.net, val_x, val_y);
        if (acc > best_acc) {
            best_acc = acc;
            best_net = model.net;
            since_improvement = 0;
        } else if (++since_improvement >= config.patience) {
            break;
        }
    }

    model.net = std::move(best_net);
    return model;
}

ActivationVector activations(const ClassifierModel& m, const SubjectRecord& record) {
    const auto out = mlp_forward(m.net, normalized_input(record, m.norm));
    ActivationVector av;
    for (int i = 0; i < kKnownCategoryCount; ++i) av.v[i] = out[i];
    return av;
}

std::array<double, kKnownCategoryCount> softmax(const ActivationVector& av) {
    const auto p = softmax(std::span<const double>(av.v.data(), av.v.size()));
    std::array<double, kKnownCategoryCount> result{};
    std::copy(p.begin(), p.end(), result.begin());
    return result;
}

double classifier_accuracy(const ClassifierModel& m, const Dataset& data) {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    collect_known(data, m.norm, inputs, labels);
    if (inputs.empty()) {
        throw std::invalid_argument("accuracy needs known-labeled records");
    }
    return accuracy_on(m.net, inputs, labels);
}

json classifier_to_json(const ClassifierModel& m) {
    json j;
    j["format_version"] = 1;
    j["kind"] = "mlp-classifier";
    j["architecture"] = m.net.sizes;
    json weights = json::array();
    for (std::size_t l = 0; l < m.net.weights.size(); ++l) {
        const std::size_t cols = m.net.sizes[l];
        const std::size_t rows = m.net.sizes[l + 1];
        json layer = json::array();
        for (std::size_t r = 0; r < rows; ++r) {
            json row = json::array();
            for (std::size_t c = 0; c < cols; ++c) {
                row.push_back(m.net.weights[l][r * cols + c]);
            }
            layer.push_back(std::move(row));
        }
        weights.push_back(std::move(layer));
    }
    j["weights"] = std::move(weights);
    j["biases"] = m.net.biases;
    j["normalization"] = {{"mean", m.norm.mean},
                          {"std", m.norm.stddev},
                          {"median", m.norm.median}};
    j["train_config"] = {{"learning_rate", m.config.learning_rate},
                         {"beta1", m.config.beta1},
                         {"beta2", m.config.beta2},
                         {"eps", m.config.eps},
                         {"l2", m.config.l2},
                         {"batch_size", m.config.batch_size},
                         {"max_epochs", m.config.max_epochs},
                         {"patience", m.config.patience},
                         {"seed", m.config.seed}};
    return j;
}

ClassifierModel classifier_from_json(const json& j) {
    if (j.at("kind").get<std::string>() != "mlp-classifier") {
        throw std::runtime_error("expected kind 'mlp-classifier'");
    }
    ClassifierModel m;
    m.net.sizes = j.at("architecture").get<std::vector<int>>();
    if (m.net.sizes.size() < 2 || m.net.sizes.front() != kIndicatorCount ||
        m.net.sizes.back() != kKnownCategoryCount) {
        throw std::runtime_error("classifier architecture does not match indicators");
    }
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.net.sizes.size() - 1 || biases.size() != weights.size()) {
        throw std::runtime_error("classifier layer count mismatch");
    }
    for (std::size_t l = 0; l + 1 < m.net.sizes.size(); ++l) {
        const std::size_t cols = m.net.sizes[l];
        const std::size_t rows = m.net.sizes[l + 1];
        const auto& layer = weights.at(l);
        if (layer.size() != rows) throw std::runtime_error("weight row count mismatch");
        std::vector<double> flat;
        flat.reserve(rows * cols);
        for (const auto& row : layer) {
            if (row.size() != cols) {
                throw std::runtime_error("weight column count mismatch");
            }
            for (const auto& v : row) flat.push_back(v.get<double>());
        }
        m.net.weights.push_back(std::move(flat));
        auto b = biases.at(l).get<std::vector<double>>();
        if (b.size() != rows) throw std::runtime_error("bias size mismatch");
        m.net.biases.push_back(std::move(b));
    }
    const auto& norm = j.at("normalization");
    m.norm.mean = norm.at("mean").get<std::array<double, kIndicatorCount>>();
    m.norm.stddev = norm.at("std").get<std::array<double, kIndicatorCount>>();
    m.norm.median = norm.at("median").get<std::array<double, kIndicatorCount>>();
    for (int i = 0; i < kIndicatorCount; ++i) {
        if (!std::isfinite(m.norm.mean[i]) || !std::isfinite(m.norm.median[i]) ||
            !(m.norm.stddev[i] > 0.0)) {
            throw std::runtime_error("invalid normalization statistics");
        }
    }
    const auto& tc = j.at("train_config");
    m.config.learning_rate = tc.at("learning_rate").get<double>();
    m.config.beta1 = tc.at("beta1").get<double>();
    m.config.beta2 = tc.at("beta2").get<double>();
    m.config.eps = tc.at("eps").get<double>();
    m.config.l2 = tc.at("l2").get<double>();
    m.config.batch_size = tc.at("batch_size").get<int>();
    m.config.max_epochs = tc.at("max_epochs").get<int>();
    m.config.patience = tc.at("patience").get<int>();
    m.config.seed = tc.at("seed").get<std::uint64_t>();
    return m;
}

void save_classifier(const ClassifierModel& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << classifier_to_json(m).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
    }
    return classifier_from_json(j);
}

}  // namespace apmax
