#include "apmax/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apmax {

Mlp make_mlp(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) {
        throw std::invalid_argument("network needs at least input and output layers");
    }
    for (int s : sizes) {
        if (s < 1) throw std::invalid_argument("layer sizes must be positive");
    }
    Mlp m;
    m.sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (double& v : w) v = rng.uniform(-limit, limit);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

namespace {

// z = W a + b for one layer.
void affine(const std::vector<double>& w, const std::vector<double>& b,
            std::span<const double> a, std::vector<double>& z) {
    const std::size_t out = b.size();
    const std::size_t in = a.size();
    z.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
        double acc = b[r];
        const double* row = w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) acc += row[c] * a[c];
        z[r] = acc;
    }
}

}  // namespace

std::vector<double> mlp_forward(const Mlp& m, std::span<const double> input) {
    if (static_cast<int>(input.size()) != m.input_dim()) {
        throw std::invalid_argument("input dimension mismatch: " +
                                    std::to_string(input.size()) + " vs " +
                                    std::to_string(m.input_dim()));
    }
    std::vector<double> a(input.begin(), input.end());
    std::vector<double> z;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        affine(m.weights[l], m.biases[l], a, z);
        if (l + 1 < m.weights.size()) {
            for (double& v : z) v = std::max(v, 0.0);
        }
        a = z;
    }
    return a;
}

MlpGradients make_gradients(const Mlp& m) {
    MlpGradients g;
    for (const auto& w : m.weights) g.weights.emplace_back(w.size(), 0.0);
    for (const auto& b : m.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

double mlp_loss_and_gradients(const Mlp& m,
                              const std::vector<std::vector<double>>& inputs,
                              const std::vector<int>& labels, double l2,
                              MlpGradients& out) {
    if (inputs.empty() || inputs.size() != labels.size()) {
        throw std::invalid_argument("loss needs matching nonempty inputs and labels");
    }
    const std::size_t layers = m.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        std::fill(out.weights[l].begin(), out.weights[l].end(), 0.0);
        std::fill(out.biases[l].begin(), out.biases[l].end(), 0.0);
    }

    const double inv_batch = 1.0 / static_cast<double>(inputs.size());
    double loss = 0.0;
    // acts[0] is the input, acts[l+1] the post-rectifier output of layer l
    // (linear for the last layer).
    std::vector<std::vector<double>> acts(layers + 1);
    std::vector<double> delta, prev_delta;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const int label = labels[s];
        if (label < 0 || label >= m.output_dim()) {
            throw std::invalid_argument("label out of range");
        }
        acts[0].assign(inputs[s].begin(), inputs[s].end());
        if (static_cast<int>(acts[0].size()) != m.input_dim()) {
            throw std::invalid_argument("input dimension mismatch");
        }
        for (std::size_t l = 0; l < layers; ++l) {
            affine(m.weights[l], m.biases[l], acts[l], acts[l + 1]);
            if (l + 1 < layers) {
                for (double& v : acts[l + 1]) v = std::max(v, 0.0);
            }
        }

        const std::vector<double> p = softmax(acts[layers]);
        loss -= inv_batch * std::log(std::max(p[label], 1e-300));

        // delta = d(loss)/d(z) at the output: (p - onehot)/batch.
        delta = p;
        delta[label] -= 1.0;
        for (double& v : delta) v *= inv_batch;

        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t rows = m.biases[l].size();
            const std::size_t cols = acts[l].size();
            for (std::size_t r = 0; r < rows; ++r) {
                out.biases[l][r] += delta[r];
                double* grow = out.weights[l].data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) {
                    grow[c] += delta[r] * acts[l][c];
                }
            }
            if (l == 0) break;
            prev_delta.assign(cols, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = m.weights[l].data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) {
                    prev_delta[c] += row[c] * delta[r];
                }
            }
            // Rectifier subgradient: zero where the activation was clamped.
            for (std::size_t c = 0; c < cols; ++c) {
                if (acts[l][c] <= 0.0) prev_delta[c] = 0.0;
            }
            delta = prev_delta;
        }
    }

    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
            loss += 0.5 * l2 * m.weights[l][i] * m.weights[l][i];
            out.weights[l][i] += l2 * m.weights[l][i];
        }
    }
    return loss;
}

AdamState make_adam_state(const Mlp& m) {
    AdamState s;
    for (const auto& w : m.weights) {
        s.m_weights.emplace_back(w.size(), 0.0);
        s.v_weights.emplace_back(w.size(), 0.0);
    }
    for (const auto& b : m.biases) {
        s.m_biases.emplace_back(b.size(), 0.0);
        s.v_biases.emplace_back(b.size(), 0.0);
    }
    return s;
}

void adam_step(Mlp& m, const MlpGradients& g, AdamState& s, double lr,
               double beta1, double beta2, double eps) {
    s.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
    auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& m1, std::vector<double>& m2) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
            param[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
        }
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        update(m.weights[l], g.weights[l], s.m_weights[l], s.v_weights[l]);
        update(m.biases[l], g.biases[l], s.m_biases[l], s.v_biases[l]);
    }
}

std::vector<double> softmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("softmax of empty vector");
    const double vmax = *std::max_element(v.begin(), v.end());
    std::vector<double> p(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - vmax);
        total += p[i];
    }
    for (double& x : p) x /= total;
    return p;
}

}  // namespace apmax
