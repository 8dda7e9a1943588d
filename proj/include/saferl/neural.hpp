#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace saferl::nn {

/// Fully-connected network, ReLU on hidden layers, identity output.
/// weights[l] is row-major with shape (dims[l+1] x dims[l]).
struct Mlp {
    std::vector<int> dims;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    std::size_t layer_count() const { return weights.size(); }
    std::size_t param_count() const;
};

/// One supervised item: network input, index of the output the target
/// applies to, and the scalar target for that output.
struct BatchItem {
    std::vector<double> x;
    int action = 0;
    double target = 0.0;
};

/// Gradients shaped exactly like the network parameters, plus the loss.
struct GradBundle {
    std::vector<std::vector<double>> d_weights;
    std::vector<std::vector<double>> d_biases;
    double loss = 0.0;
};

struct AdamState {
    double alpha = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t t = 0;
    std::vector<std::vector<double>> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;

    static AdamState for_net(const Mlp& net, double alpha);
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    double loss = 0.0;
    bool passed = false;
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
/// Deterministic for a given seed.
Mlp mlp_init(const std::vector<int>& dims, std::uint64_t seed);

std::vector<double> forward(const Mlp& net, const std::vector<double>& x);

/// Loss is (1/2) * mean over the batch of (target - output[action])^2;
/// outputs other than the selected one contribute nothing.
double batch_loss(const Mlp& net, const std::vector<BatchItem>& batch);

/// Backpropagation of batch_loss through every parameter.
GradBundle loss_and_grads(const Mlp& net, const std::vector<BatchItem>& batch);

/// Standard bias-corrected Adam update, in place.
void adam_step(Mlp& net, AdamState& adam, const GradBundle& grads);

/// Central-difference comparison of loss_and_grads against batch_loss.
/// Relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
GradCheckReport grad_check(const Mlp& net, const std::vector<BatchItem>& batch,
                           double step, double tolerance);

/// JSON with dims plus row-major weight and bias arrays; doubles survive
/// the round trip bit-exactly.
std::string serialize(const Mlp& net);
Mlp deserialize(const std::string& payload);

} // namespace saferl::nn
