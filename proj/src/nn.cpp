// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/nn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& post) {
    switch (act) {
    case Activation::tanh:
        post = pre.array().tanh();
        break;
    case Activation::silu:
        post = pre.array() / (1.0 + (-pre.array()).exp());
        break;
    }
}

// d post / d pre, elementwise, multiplied into `grad`.
void scale_by_derivative(Activation act, const Matrix& pre, const Matrix& post, Matrix& grad) {
    switch (act) {
    case Activation::tanh:
        grad.array() *= 1.0 - post.array().square();
        break;
    case Activation::silu: {
        const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-pre.array()).exp());
        grad.array() *= sig * (1.0 + pre.array() * (1.0 - sig));
        break;
    }
    }
}

}  // namespace

void validate(const NetworkConfig& c) {
    ESDDPM_CHECK(c.input_dim >= 0 && c.output_dim >= 1, InvalidArgument,
                 "network needs input_dim >= 0 and output_dim >= 1");
    ESDDPM_CHECK(c.time_embed_dim >= 0 && c.time_embed_dim % 2 == 0, InvalidArgument,
                 "time embedding dimension must be even and nonnegative");
    ESDDPM_CHECK(c.time_embed_dim == 0 || c.horizon >= 1, InvalidArgument,
                 "time embedding needs horizon >= 1");
    ESDDPM_CHECK(c.class_count >= 0 && c.class_embed_dim >= 0, InvalidArgument,
                 "class count and embedding width must be nonnegative");
    ESDDPM_CHECK((c.class_count == 0) == (c.class_embed_dim == 0), InvalidArgument,
                 "class embedding width must be positive exactly when class_count > 0");
    ESDDPM_CHECK(c.input_width() >= 1, InvalidArgument, "network input width must be positive");
    for (int w : c.hidden) {
        ESDDPM_CHECK(w >= 1, InvalidArgument, "hidden widths must be positive");
    }
}

// ---------------------------------------------------------------------------
// ParameterTensors

ParameterTensors ParameterTensors::zeros_like() const {
    ParameterTensors z;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
        z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    z.class_embedding = Matrix::Zero(class_embedding.rows(), class_embedding.cols());
    return z;
}

void ParameterTensors::set_zero() {
    for (auto& l : layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    class_embedding.setZero();
}

bool ParameterTensors::same_shape(const ParameterTensors& o) const {
    if (layers.size() != o.layers.size()) {
        return false;
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].weight.rows() != o.layers[i].weight.rows() ||
            layers[i].weight.cols() != o.layers[i].weight.cols() ||
            layers[i].bias.size() != o.layers[i].bias.size()) {
            return false;
        }
    }
    return class_embedding.rows() == o.class_embedding.rows() &&
           class_embedding.cols() == o.class_embedding.cols();
}

bool ParameterTensors::all_finite() const {
    for (const auto& view : views()) {
        for (double v : view) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

std::size_t ParameterTensors::parameter_count() const {
    std::size_t n = 0;
    for (const auto& view : views()) {
        n += view.size();
    }
    return n;
}

std::vector<std::span<double>> ParameterTensors::views() {
    std::vector<std::span<double>> out;
    out.reserve(2 * layers.size() + 1);
    for (auto& l : layers) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    out.emplace_back(class_embedding.data(), static_cast<std::size_t>(class_embedding.size()));
    return out;
}

std::vector<std::span<const double>> ParameterTensors::views() const {
    std::vector<std::span<const double>> out;
    out.reserve(2 * layers.size() + 1);
    for (const auto& l : layers) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    out.emplace_back(class_embedding.data(), static_cast<std::size_t>(class_embedding.size()));
    return out;
}

ParameterTensors& ParameterTensors::operator+=(const ParameterTensors& o) {
    ESDDPM_CHECK(same_shape(o), DimensionMismatch, "parameter tensors differ in shape");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weight += o.layers[i].weight;
        layers[i].bias += o.layers[i].bias;
    }
    class_embedding += o.class_embedding;
    return *this;
}

// ---------------------------------------------------------------------------
// Time embedding

double time_frequency(int k, int dim, int horizon) {
    const int half = dim / 2;
    return std::numbers::pi * std::pow(static_cast<double>(horizon), static_cast<double>(k) / half - 1.0);
}

Vector embed_time(Step t, int dim, int horizon) {
    ESDDPM_CHECK(dim > 0 && dim % 2 == 0, InvalidArgument, "time embedding dimension must be even");
    ESDDPM_CHECK(horizon >= 1, InvalidArgument, "time embedding needs horizon >= 1");
    ESDDPM_CHECK(t >= 0 && t <= horizon, IndexOutOfRange,
                 "step " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
    Vector e(dim);
    for (int k = 0; k < dim / 2; ++k) {
        const double phase = time_frequency(k, dim, horizon) * t;
        e[2 * k] = std::sin(phase);
        e[2 * k + 1] = std::cos(phase);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(NetworkConfig config, Rng& init_rng) : config_(std::move(config)) {
    validate(config_);
    std::vector<int> widths;
    widths.push_back(config_.input_width());
    widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
    widths.push_back(config_.output_dim);

    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l];
        const int out = widths[l + 1];
        DenseLayer layer{Matrix::Zero(out, in), Vector::Zero(out)};
        if (l + 2 < widths.size()) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            std::uniform_real_distribution<double> u(-bound, bound);
            // Row-major fill order keeps init independent of Eigen storage.
            for (int r = 0; r < out; ++r) {
                for (int c = 0; c < in; ++c) {
                    layer.weight(r, c) = u(init_rng);
                }
            }
            for (int r = 0; r < out; ++r) {
                layer.bias[r] = u(init_rng);
            }
        }
        params_.layers.push_back(std::move(layer));
    }
    params_.class_embedding = Matrix::Zero(config_.class_embed_dim, config_.class_count);
    if (config_.class_count > 0) {
        std::normal_distribution<double> n(0.0, 1.0);
        for (int c = 0; c < config_.class_count; ++c) {
            for (int r = 0; r < config_.class_embed_dim; ++r) {
                params_.class_embedding(r, c) = n(init_rng);
            }
        }
    }
}

Network::Network(NetworkConfig config, ParameterTensors params)
    : config_(std::move(config)), params_(std::move(params)) {
    validate(config_);
    Rng dummy(0);
    NetworkConfig shape_only = config_;
    Network reference(shape_only, dummy);
    ESDDPM_CHECK(params_.same_shape(reference.params_), DimensionMismatch,
                 "parameters do not match the network config");
}

Matrix Network::assemble_input(const Matrix& x, std::span<const Step> steps, const Labels& labels) const {
    const Eigen::Index batch = x.cols();
    ESDDPM_CHECK(x.rows() == config_.input_dim, DimensionMismatch,
                 "network expects input dimension " + std::to_string(config_.input_dim) + ", got " +
                     std::to_string(x.rows()));
    Matrix in(config_.input_width(), batch);
    in.topRows(config_.input_dim) = x;

    if (config_.time_embed_dim > 0) {
        ESDDPM_CHECK(steps.size() == 1 || steps.size() == static_cast<std::size_t>(batch),
                     DimensionMismatch, "steps must have size 1 or match the batch");
        auto block = in.middleRows(config_.input_dim, config_.time_embed_dim);
        if (steps.size() == 1) {
            const Vector e = embed_time(steps[0], config_.time_embed_dim, config_.horizon);
            block = e.replicate(1, batch);
        } else {
            for (Eigen::Index j = 0; j < batch; ++j) {
                block.col(j) = embed_time(steps[static_cast<std::size_t>(j)], config_.time_embed_dim,
                                          config_.horizon);
            }
        }
    }

    if (config_.class_count > 0) {
        ESDDPM_CHECK(labels.size() == static_cast<std::size_t>(batch), InvalidArgument,
                     "conditional network needs one label per sample");
        auto block = in.bottomRows(config_.class_embed_dim);
        for (Eigen::Index j = 0; j < batch; ++j) {
            const int c = labels[static_cast<std::size_t>(j)];
            ESDDPM_CHECK(c >= 0 && c < config_.class_count, IndexOutOfRange,
                         "class label " + std::to_string(c) + " out of range");
            block.col(j) = params_.class_embedding.col(c);
        }
    } else {
        ESDDPM_CHECK(labels.empty(), InvalidArgument, "unconditional network given labels");
    }
    return in;
}

Matrix Network::forward(const Matrix& x, std::span<const Step> steps, const Labels& labels,
                        ForwardCache* cache) const {
    Matrix h = assemble_input(x, steps, labels);
    const std::size_t n_layers = params_.layers.size();
    if (cache != nullptr) {
        cache->input = h;
        cache->pre.clear();
        cache->post.clear();
        cache->labels = labels;
    }
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const DenseLayer& layer = params_.layers[l];
        Matrix pre = layer.weight * h;
        pre.colwise() += layer.bias;
        Matrix post;
        apply_activation(config_.activation, pre, post);
        if (cache != nullptr) {
            cache->pre.push_back(std::move(pre));
            cache->post.push_back(post);
        }
        h = std::move(post);
    }
    const DenseLayer& last = params_.layers.back();
    Matrix out = last.weight * h;
    out.colwise() += last.bias;
    return out;
}

Vector Network::forward(const Vector& x, Step t, Label c) const {
    const Step steps[1] = {t};
    Labels labels;
    if (c.has_value()) {
        labels.push_back(*c);
    }
    return forward(Matrix(x), std::span<const Step>(steps, 1), labels);
}

BackwardResult Network::backward(const ForwardCache& cache, const Matrix& upstream) const {
    const std::size_t n_layers = params_.layers.size();
    ESDDPM_CHECK(upstream.rows() == config_.output_dim && upstream.cols() == cache.input.cols(),
                 DimensionMismatch, "upstream gradient shape does not match the network output");
    ESDDPM_CHECK(cache.pre.size() + 1 == n_layers, InvalidArgument, "forward cache is incomplete");

    BackwardResult result{params_.zeros_like(), Matrix()};
    Matrix delta = upstream;
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& h_in = l == 0 ? cache.input : cache.post[l - 1];
        result.grads.layers[l].weight.noalias() = delta * h_in.transpose();
        result.grads.layers[l].bias = delta.rowwise().sum();
        Matrix prev = params_.layers[l].weight.transpose() * delta;
        if (l > 0) {
            scale_by_derivative(config_.activation, cache.pre[l - 1], cache.post[l - 1], prev);
        }
        delta = std::move(prev);
    }
    // delta now holds d/d(first-layer input).
    if (config_.class_count > 0) {
        const auto block = delta.bottomRows(config_.class_embed_dim);
        for (Eigen::Index j = 0; j < delta.cols(); ++j) {
            result.grads.class_embedding.col(cache.labels[static_cast<std::size_t>(j)]) += block.col(j);
        }
    }
    result.input_grad = delta.topRows(config_.input_dim);
    return result;
}

Vector predict_eps(const Network& net, const Vector& x, Step t, Label c) {
    if (c.has_value()) {
        ESDDPM_CHECK(net.config().class_count > 0, InvalidArgument, "unconditional network given a label");
    } else {
        ESDDPM_CHECK(net.config().class_count == 0, InvalidArgument, "conditional network needs a label");
    }
    return net.forward(x, t, c);
}

GradientBuffer backprop(const Network& net, const Vector& x, Step t, Label c, const Vector& upstream) {
    ESDDPM_CHECK(upstream.size() == net.config().output_dim, DimensionMismatch,
                 "upstream gradient has the wrong dimension");
    if (!c.has_value()) {
        ESDDPM_CHECK(net.config().class_count == 0, InvalidArgument, "conditional network needs a label");
    }
    const Step steps[1] = {t};
    Labels labels;
    if (c.has_value()) {
        labels.push_back(*c);
    }
    ForwardCache cache;
    net.forward(Matrix(x), std::span<const Step>(steps, 1), labels, &cache);
    return net.backward(cache, Matrix(upstream)).grads;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_network(const Network& net) {
    AdamState s;
    s.first = net.params().zeros_like();
    s.second = net.params().zeros_like();
    return s;
}

void adam_step(Network& net, const GradientBuffer& grads, AdamState& state, double learning_rate) {
    ESDDPM_CHECK(learning_rate > 0.0, InvalidArgument, "learning rate must be positive");
    ParameterTensors& params = net.mutable_params();
    ESDDPM_CHECK(params.same_shape(grads) && params.same_shape(state.first) &&
                     params.same_shape(state.second),
                 DimensionMismatch, "gradient or optimizer state shape does not match the network");

    const auto g_views = grads.views();
    for (std::size_t k = 0; k < g_views.size(); ++k) {
        for (double g : g_views[k]) {
            if (!std::isfinite(g)) {
                throw NumericalError("non-finite gradient in parameter tensor " + std::to_string(k));
            }
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(state.beta1, t);
    const double corr2 = 1.0 - std::pow(state.beta2, t);
    auto p_views = params.views();
    auto m_views = state.first.views();
    auto v_views = state.second.views();
    for (std::size_t k = 0; k < p_views.size(); ++k) {
        auto p = p_views[k];
        auto m = m_views[k];
        auto v = v_views[k];
        auto g = g_views[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / corr1;
            const double v_hat = v[i] / corr2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
    if (!params.all_finite()) {
        throw NumericalError("parameters became non-finite after an Adam step");
    }
}

}  // namespace esddpm
