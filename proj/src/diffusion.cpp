// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

void check_trained(const DiffusionModel& model, Step t) {
    if (t < 1 || t > model.trained_horizon) {
        throw UntrainedStep("step " + std::to_string(t) + " outside trained range [1, " +
                            std::to_string(model.trained_horizon) + "]");
    }
}

// Effective (beta, alpha) of the jump t -> t_next.
std::pair<double, double> respaced_beta_alpha(const NoiseSchedule& s, Step t, Step t_next) {
    if (t_next == t - 1) {
        return {s.beta(t), s.alpha(t)};
    }
    const double alpha = s.alpha_bar(t) / s.alpha_bar(t_next);
    return {1.0 - alpha, alpha};
}

Labels labels_for(Label c, Eigen::Index n) {
    return c.has_value() ? Labels(static_cast<std::size_t>(n), *c) : Labels{};
}

}  // namespace

NetworkConfig default_denoiser_config(int data_dim, int horizon, int class_count) {
    NetworkConfig c;
    c.input_dim = data_dim;
    c.output_dim = data_dim;
    c.hidden = {128, 128};
    c.time_embed_dim = 32;
    c.horizon = horizon;
    c.class_count = class_count;
    c.class_embed_dim = class_count > 0 ? 16 : 0;
    c.activation = Activation::tanh;
    return c;
}

DiffusionModel DiffusionModel::create(NoiseSchedule schedule, Step trained_horizon, const NetworkConfig& config,
                                      Rng& init_rng, SigmaMode sigma_mode) {
    DiffusionModel m{Network(config, init_rng), std::move(schedule), trained_horizon, sigma_mode};
    m.validate();
    return m;
}

void DiffusionModel::validate() const {
    ESDDPM_CHECK(trained_horizon >= 1 && trained_horizon <= schedule.horizon(), InvalidArgument,
                 "trained horizon must satisfy 1 <= T' <= T");
    const NetworkConfig& c = net.config();
    ESDDPM_CHECK(c.input_dim == c.output_dim, InvalidArgument, "denoiser must map data dimension to itself");
    ESDDPM_CHECK(c.time_embed_dim > 0, InvalidArgument, "denoiser needs a time embedding");
    ESDDPM_CHECK(c.horizon == schedule.horizon(), InvalidArgument,
                 "denoiser time embedding horizon differs from the schedule");
}

Matrix predict_eps_batch(const DiffusionModel& model, const Matrix& x, Step t, const Labels& labels,
                         EvalCounter* counter) {
    check_trained(model, t);
    if (model.conditional()) {
        ESDDPM_CHECK(labels.size() == static_cast<std::size_t>(x.cols()), InvalidArgument,
                     "conditional model needs a label per sample");
    } else {
        ESDDPM_CHECK(labels.empty(), InvalidArgument, "unconditional model given labels");
    }
    const Step steps[1] = {t};
    Matrix out = model.net.forward(x, std::span<const Step>(steps, 1), labels);
    if (counter != nullptr) {
        counter->add(static_cast<std::uint64_t>(x.cols()));
    }
    return out;
}

double reverse_variance(const DiffusionModel& model, Step t, Step t_next) {
    ESDDPM_CHECK(t_next >= 1 && t_next < t, InvalidArgument, "reverse_variance needs 1 <= t_next < t");
    const NoiseSchedule& s = model.schedule;
    const double beta = respaced_beta_alpha(s, t, t_next).first;
    if (model.sigma_mode == SigmaMode::beta) {
        return beta;
    }
    if (t_next == t - 1) {
        return s.beta_tilde(t);
    }
    return beta * s.one_minus_alpha_bar(t_next) / s.one_minus_alpha_bar(t);
}

Matrix ancestral_transition(const DiffusionModel& model, const Matrix& xt, Step t, Step t_next,
                            const Matrix& eps_hat, const Matrix& noise) {
    check_trained(model, t);
    ESDDPM_CHECK(t_next >= 0 && t_next < t, InvalidArgument, "ancestral transition needs 0 <= t_next < t");
    ESDDPM_CHECK(eps_hat.rows() == xt.rows() && eps_hat.cols() == xt.cols(), DimensionMismatch,
                 "eps prediction shape differs from x^t");
    const NoiseSchedule& s = model.schedule;
    const auto [beta, alpha] = respaced_beta_alpha(s, t, t_next);
    Matrix mean = (xt - (beta / std::sqrt(s.one_minus_alpha_bar(t))) * eps_hat) / std::sqrt(alpha);
    if (t_next == 0) {
        return mean;
    }
    ESDDPM_CHECK(noise.rows() == xt.rows() && noise.cols() == xt.cols(), DimensionMismatch,
                 "noise shape differs from x^t");
    return mean + std::sqrt(reverse_variance(model, t, t_next)) * noise;
}

Vector reverse_mean(const DiffusionModel& model, const Vector& xt, Step t, const Vector& eps_hat) {
    check_trained(model, t);
    const NoiseSchedule& s = model.schedule;
    return (xt - (s.beta(t) / std::sqrt(s.one_minus_alpha_bar(t))) * eps_hat) / std::sqrt(s.alpha(t));
}

Vector denoise_step(const DiffusionModel& model, const Vector& xt, Step t, Rng& rng, Label c) {
    check_trained(model, t);
    ESDDPM_CHECK(xt.size() == model.data_dim(), DimensionMismatch, "x^t has the wrong dimension");
    const Vector eps_hat = predict_eps(model.net, xt, t, c);
    Vector mean = reverse_mean(model, xt, t, eps_hat);
    if (t == 1) {
        return mean;
    }
    return mean + std::sqrt(reverse_variance(model, t, t - 1)) * standard_normal(rng, xt.size());
}

Matrix draw_noise(std::span<Rng> rngs, int dim) {
    Matrix out(dim, static_cast<Eigen::Index>(rngs.size()));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t j = 0; j < rngs.size(); ++j) {
        for (int i = 0; i < dim; ++i) {
            out(i, static_cast<Eigen::Index>(j)) = normal(rngs[j]);
        }
    }
    return out;
}

SampleSet sample_full(const DiffusionModel& model, int n, Rng& rng, const SamplingOptions& options, Label c) {
    model.validate();
    ESDDPM_CHECK(n >= 0, InvalidArgument, "sample count must be nonnegative");
    ESDDPM_CHECK(model.trained_horizon == model.schedule.horizon(), InvalidArgument,
                 "sample_full needs a model trained on the full horizon");
    ESDDPM_CHECK(c.has_value() == model.conditional(), InvalidArgument,
                 "label presence must match the model's conditioning");
    const int d = model.data_dim();
    const Step T = model.schedule.horizon();
    const std::uint64_t seed = rng();
    SampleSet out(d, n);
    for_each_chunk(n, options.chunk_size, options.workers, [&](std::int64_t begin, std::int64_t end) {
        const auto count = static_cast<Eigen::Index>(end - begin);
        std::vector<Rng> rngs;
        rngs.reserve(static_cast<std::size_t>(count));
        for (std::int64_t i = begin; i < end; ++i) {
            rngs.push_back(stream_rng(seed, static_cast<std::uint64_t>(i)));
        }
        const Labels labels = labels_for(c, count);
        Matrix x = draw_noise(rngs, d);
        for (Step t = T; t >= 1; --t) {
            const Matrix eps_hat = predict_eps_batch(model, x, t, labels, options.counter);
            const Matrix noise = t > 1 ? draw_noise(rngs, d) : Matrix();
            x = ancestral_transition(model, x, t, t - 1, eps_hat, noise);
        }
        out.middleCols(static_cast<Eigen::Index>(begin), count) = x;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Training

TrainingDraw draw_training_targets(const NoiseSchedule& schedule, const Matrix& x0, Step horizon, Rng& rng) {
    ESDDPM_CHECK(x0.cols() > 0, InvalidArgument, "training batch is empty");
    ESDDPM_CHECK(horizon >= 1 && horizon <= schedule.horizon(), InvalidArgument,
                 "training horizon must satisfy 1 <= T' <= T");
    TrainingDraw draw;
    draw.steps.resize(static_cast<std::size_t>(x0.cols()));
    draw.eps.resize(x0.rows(), x0.cols());
    draw.xt.resize(x0.rows(), x0.cols());
    std::uniform_int_distribution<int> pick_t(1, horizon);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
        const Step t = pick_t(rng);
        draw.steps[static_cast<std::size_t>(j)] = t;
        for (Eigen::Index i = 0; i < x0.rows(); ++i) {
            draw.eps(i, j) = normal(rng);
        }
        const MarginalParams m = marginal(schedule, t);
        draw.xt.col(j) = m.scale * x0.col(j) + std::sqrt(m.noise_var) * draw.eps.col(j);
    }
    return draw;
}

double eps_regression_loss(const Matrix& eps, const Matrix& eps_hat, Matrix* upstream) {
    ESDDPM_CHECK(eps.rows() == eps_hat.rows() && eps.cols() == eps_hat.cols() && eps.cols() > 0,
                 DimensionMismatch, "eps and eps prediction differ in shape");
    const Matrix residual = eps - eps_hat;
    const double n = static_cast<double>(eps.cols());
    if (upstream != nullptr) {
        *upstream = (-2.0 / n) * residual;
    }
    return residual.colwise().squaredNorm().sum() / n;
}

LossAndGrad train_loss_step(const DiffusionModel& model, const Matrix& batch, Rng& rng, const Labels& labels) {
    ESDDPM_CHECK(batch.cols() > 0, InvalidArgument, "training batch is empty");
    ESDDPM_CHECK(batch.rows() == model.data_dim(), DimensionMismatch, "batch has the wrong data dimension");
    const TrainingDraw draw = draw_training_targets(model.schedule, batch, model.trained_horizon, rng);
    ForwardCache cache;
    const Matrix eps_hat = model.net.forward(draw.xt, draw.steps, labels, &cache);
    Matrix upstream;
    const double loss = eps_regression_loss(draw.eps, eps_hat, &upstream);
    if (!std::isfinite(loss)) {
        throw NumericalError("training loss is not finite");
    }
    return {loss, model.net.backward(cache, upstream).grads};
}

Trainer::Trainer(DiffusionModel& model, TrainConfig config)
    : Trainer(model, config, AdamState::for_network(model.net), 0) {}

Trainer::Trainer(DiffusionModel& model, TrainConfig config, AdamState state, std::uint64_t iteration)
    : model_(model), config_(config), state_(std::move(state)), iteration_(iteration) {
    model_.validate();
    ESDDPM_CHECK(config_.batch_size >= 1 && config_.iterations >= 0 && config_.learning_rate > 0.0,
                 InvalidArgument, "train config needs positive batch size and learning rate");
    ESDDPM_CHECK(config_.final_lr_fraction > 0.0 && config_.final_lr_fraction <= 1.0, InvalidArgument,
                 "final_lr_fraction must lie in (0, 1]");
    ESDDPM_CHECK(config_.horizon == model_.trained_horizon, InvalidArgument,
                 "train config horizon differs from the model's trained horizon");
    ESDDPM_CHECK(model_.net.params().same_shape(state_.first), DimensionMismatch,
                 "optimizer state does not match the network");
}

double Trainer::learning_rate_at(std::uint64_t i) const {
    const double f = config_.final_lr_fraction;
    if (f == 1.0 || config_.iterations == 0) {
        return config_.learning_rate;
    }
    const double progress = std::min(1.0, static_cast<double>(i) / config_.iterations);
    return config_.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

double Trainer::run(const SampleSet& data, const Labels& labels, int iterations) {
    ESDDPM_CHECK(data.cols() > 0, InvalidArgument, "training data is empty");
    ESDDPM_CHECK(labels.empty() || labels.size() == static_cast<std::size_t>(data.cols()), DimensionMismatch,
                 "labels must match the training data");
    ESDDPM_CHECK(labels.empty() != model_.conditional(), InvalidArgument,
                 "labels must be given exactly for conditional models");
    const int B = config_.batch_size;
    double total = 0.0;
    Matrix batch(data.rows(), B);
    Labels batch_labels;
    for (int it = 0; it < iterations; ++it) {
        Rng rng = stream_rng(config_.seed, iteration_);
        std::uniform_int_distribution<Eigen::Index> pick(0, data.cols() - 1);
        batch_labels.clear();
        for (int j = 0; j < B; ++j) {
            const Eigen::Index k = pick(rng);
            batch.col(j) = data.col(k);
            if (!labels.empty()) {
                batch_labels.push_back(labels[static_cast<std::size_t>(k)]);
            }
        }
        const LossAndGrad lg = train_loss_step(model_, batch, rng, batch_labels);
        adam_step(model_.net, lg.grads, state_, learning_rate_at(iteration_));
        losses_.push_back(lg.loss);
        total += lg.loss;
        ++iteration_;
    }
    return iterations > 0 ? total / iterations : 0.0;
}

}  // namespace esddpm
