// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "esddpm/rng.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

enum class Activation : std::uint8_t { tanh = 0, silu = 1 };

struct NetworkConfig {
    int input_dim = 2;           // data part of the input; may be 0 for label-only nets
    int output_dim = 2;
    std::vector<int> hidden = {128, 128};
    int time_embed_dim = 32;     // 0 disables the time pathway
    int horizon = 1000;          // T used to scale time features
    int class_count = 0;         // 0 = unconditional
    int class_embed_dim = 0;     // learned embedding width when class_count > 0
    Activation activation = Activation::tanh;

    /// Width of the first layer: data + time features + class embedding.
    int input_width() const { return input_dim + time_embed_dim + class_embed_dim; }
};

/// Throws InvalidArgument when the config cannot describe a network.
void validate(const NetworkConfig& config);

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Every trainable tensor of a network. Also used, with identical shapes, as
/// gradient storage and as optimizer moment storage.
struct ParameterTensors {
    std::vector<DenseLayer> layers;
    Matrix class_embedding;  // class_embed_dim x class_count (empty when unconditional)

    /// Same shapes, all zeros.
    ParameterTensors zeros_like() const;
    void set_zero();
    bool same_shape(const ParameterTensors& other) const;
    bool all_finite() const;
    std::size_t parameter_count() const;

    /// Flat views in a fixed order: per layer weight then bias, then the
    /// class embedding.
    std::vector<std::span<double>> views();
    std::vector<std::span<const double>> views() const;

    ParameterTensors& operator+=(const ParameterTensors& other);
};

/// Gradient of a scalar objective w.r.t. every parameter tensor.
using GradientBuffer = ParameterTensors;

/// Sinusoidal features of step t: interleaved (sin, cos) pairs at
/// frequencies pi * T^(k/(dim/2) - 1), k = 0 .. dim/2 - 1. The lowest
/// frequency spans half a turn over [0, T], which keeps the map injective.
Vector embed_time(Step t, int dim, int horizon);

/// Frequency of the k-th (sin, cos) pair used by embed_time.
double time_frequency(int k, int dim, int horizon);

/// Activations kept from a forward pass for the backward pass.
struct ForwardCache {
    Matrix input;                 // assembled first-layer input
    std::vector<Matrix> pre;      // pre-activations of hidden layers
    std::vector<Matrix> post;     // activations of hidden layers
    Labels labels;
};

struct BackwardResult {
    GradientBuffer grads;
    Matrix input_grad;  // gradient w.r.t. the data part of the input (input_dim x B)
};

/// Multilayer perceptron with optional sinusoidal time features and a learned
/// class embedding concatenated to its input. Hidden layers use a smooth
/// activation; the output layer is linear.
class Network {
public:
    Network() = default;
    /// Fan-in uniform init for hidden layers, zero output layer.
    Network(NetworkConfig config, Rng& init_rng);
    /// Adopts explicit parameters; shapes are checked against the config.
    Network(NetworkConfig config, ParameterTensors params);

    const NetworkConfig& config() const { return config_; }
    const ParameterTensors& params() const { return params_; }
    ParameterTensors& mutable_params() { return params_; }

    /// Batched forward pass over columns of x. `steps` has size 1 (broadcast)
    /// or x.cols(); it is ignored when the time pathway is disabled.
    Matrix forward(const Matrix& x, std::span<const Step> steps, const Labels& labels,
                   ForwardCache* cache = nullptr) const;

    Vector forward(const Vector& x, Step t, Label c) const;

    /// Reverse-mode gradient of sum_j <upstream_j, output_j> for a cached
    /// forward pass.
    BackwardResult backward(const ForwardCache& cache, const Matrix& upstream) const;

private:
    Matrix assemble_input(const Matrix& x, std::span<const Step> steps, const Labels& labels) const;

    NetworkConfig config_;
    ParameterTensors params_;
};

/// Noise prediction eps_theta(x, t, c) of a denoiser network.
Vector predict_eps(const Network& net, const Vector& x, Step t, Label c = std::nullopt);

/// Exact gradient of <upstream, predict_eps(net, x, t, c)> w.r.t. all parameters.
GradientBuffer backprop(const Network& net, const Vector& x, Step t, Label c, const Vector& upstream);

/// First and second moment estimates for Adam.
struct AdamState {
    ParameterTensors first;
    ParameterTensors second;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_network(const Network& net);
};

/// One bias-corrected Adam update. Rejects non-finite gradients with a
/// NumericalError naming the offending tensor.
void adam_step(Network& net, const GradientBuffer& grads, AdamState& state, double learning_rate);

}  // namespace esddpm
