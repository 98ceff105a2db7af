// Minimal feed-forward network: rectifier hidden layers, linear output,
// softmax cross-entropy loss with an L2 weight penalty, Adam updates.
// Layer sizes are free so tests can gradient-check small random networks;
// the diagnosis classifier instantiates 14 -> 32 -> 16 -> 2.

#pragma once

#include <span>
#include <vector>

#include "apmax/rng.hpp"

namespace apmax {

struct Mlp {
    std::vector<int> sizes;
    // weights[l] is row-major sizes[l+1] x sizes[l]; biases[l] has sizes[l+1].
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
};

// Xavier-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases.
Mlp make_mlp(const std::vector<int>& sizes, Rng& rng);

// Pre-softmax output scores. Throws on input dimension mismatch.
std::vector<double> mlp_forward(const Mlp& m, std::span<const double> input);

struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

MlpGradients make_gradients(const Mlp& m);

// Mean softmax cross-entropy over the batch plus (l2/2)*sum(w^2), written
// into `out` (overwritten, not accumulated). Returns the loss. Labels index
// the output dimension.
double mlp_loss_and_gradients(const Mlp& m,
                              const std::vector<std::vector<double>>& inputs,
                              const std::vector<int>& labels, double l2,
                              MlpGradients& out);

struct AdamState {
    std::vector<std::vector<double>> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;
    long step = 0;
};

AdamState make_adam_state(const Mlp& m);

void adam_step(Mlp& m, const MlpGradients& g, AdamState& s, double lr,
               double beta1, double beta2, double eps);

// Max-subtracted softmax; finite inputs of any magnitude map to a simplex.
std::vector<double> softmax(std::span<const double> v);

}  // namespace apmax
