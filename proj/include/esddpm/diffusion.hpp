// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "esddpm/nn.hpp"
#include "esddpm/parallel.hpp"
#include "esddpm/rng.hpp"
#include "esddpm/schedule.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

/// Reverse-process variance sigma_t^2: beta_t or the posterior variance.
enum class SigmaMode : std::uint8_t { beta = 0, beta_tilde = 1 };

/// Default denoiser: [d + 32 (+16), 128, 128, d], tanh.
NetworkConfig default_denoiser_config(int data_dim, int horizon, int class_count = 0);

/// A noise-prediction network trained on steps 1..trained_horizon of a schedule.
struct DiffusionModel {
    Network net;
    NoiseSchedule schedule = NoiseSchedule::linear(1);
    Step trained_horizon = 1;
    SigmaMode sigma_mode = SigmaMode::beta_tilde;

    static DiffusionModel create(NoiseSchedule schedule, Step trained_horizon, const NetworkConfig& config,
                                 Rng& init_rng, SigmaMode sigma_mode = SigmaMode::beta_tilde);

    /// Throws unless 1 <= T' <= T and the network matches the schedule.
    void validate() const;
    int data_dim() const { return net.config().output_dim; }
    bool conditional() const { return net.config().class_count > 0; }
    int class_count() const { return net.config().class_count; }
};

/// Options shared by all batched samplers.
struct SamplingOptions {
    int chunk_size = 256;
    int workers = 1;
    EvalCounter* counter = nullptr;
};

/// eps_theta over a batch at a single step. Counts x.cols() evaluations.
Matrix predict_eps_batch(const DiffusionModel& model, const Matrix& x, Step t, const Labels& labels,
                         EvalCounter* counter = nullptr);

/// Variance of the reverse transition t -> t_next under the model's sigma
/// mode, using betas respaced over the pair (reduces to beta_t / beta~_t
/// when t_next == t - 1).
double reverse_variance(const DiffusionModel& model, Step t, Step t_next);

/// Ancestral reverse transition t -> t_next given eps predictions and
/// standard-normal noise. Returns the mean without noise when t_next == 0.
Matrix ancestral_transition(const DiffusionModel& model, const Matrix& xt, Step t, Step t_next,
                            const Matrix& eps_hat, const Matrix& noise);

/// Mean of p_theta(x^{t-1} | x^t) for given eps prediction.
Vector reverse_mean(const DiffusionModel& model, const Vector& xt, Step t, const Vector& eps_hat);

/// One stochastic reverse step x^t -> x^{t-1}; noiseless at t == 1.
Vector denoise_step(const DiffusionModel& model, const Vector& xt, Step t, Rng& rng, Label c = std::nullopt);

/// Column j drawn from rngs[j].
Matrix draw_noise(std::span<Rng> rngs, int dim);

/// Vanilla full-length sampler: x^T ~ N(0, I), then t = T .. 1.
SampleSet sample_full(const DiffusionModel& model, int n, Rng& rng, const SamplingOptions& options = {},
                      Label c = std::nullopt);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int batch_size = 256;
    int iterations = 2000;
    double learning_rate = 1e-3;
    /// Cosine decay from learning_rate down to final_lr_fraction * learning_rate
    /// over `iterations`; 1 keeps the rate constant.
    double final_lr_fraction = 1.0;
    std::uint64_t seed = 0;
    Step horizon = 1;  // T'; must match the model
};

/// x^t, t and eps drawn for one training batch (t uniform on 1..horizon).
struct TrainingDraw {
    Matrix xt;
    std::vector<Step> steps;
    Matrix eps;
};

TrainingDraw draw_training_targets(const NoiseSchedule& schedule, const Matrix& x0, Step horizon, Rng& rng);

/// Mean over columns of ||eps - eps_hat||^2. Writes d loss / d eps_hat
/// into `upstream` when given.
double eps_regression_loss(const Matrix& eps, const Matrix& eps_hat, Matrix* upstream = nullptr);

struct LossAndGrad {
    double loss = 0.0;
    GradientBuffer grads;
};

/// Simplified eps-regression surrogate of the truncated loss, over one batch.
LossAndGrad train_loss_step(const DiffusionModel& model, const Matrix& batch, Rng& rng,
                            const Labels& labels = {});

/// Minibatch Adam training. Iteration i draws all its randomness from
/// stream_rng(seed, i), so a run resumed from (params, optimizer, iteration)
/// reproduces an uninterrupted run bit for bit.
class Trainer {
public:
    Trainer(DiffusionModel& model, TrainConfig config);
    Trainer(DiffusionModel& model, TrainConfig config, AdamState state, std::uint64_t iteration);

    /// Runs `iterations` more steps; returns their mean loss.
    double run(const SampleSet& data, const Labels& labels, int iterations);

    std::uint64_t iteration() const { return iteration_; }
    /// Learning rate used by iteration i.
    double learning_rate_at(std::uint64_t i) const;
    const AdamState& optimizer() const { return state_; }
    const std::vector<double>& losses() const { return losses_; }
    const TrainConfig& config() const { return config_; }

private:
    DiffusionModel& model_;
    TrainConfig config_;
    AdamState state_;
    std::uint64_t iteration_ = 0;
    std::vector<double> losses_;
};

}  // namespace esddpm
