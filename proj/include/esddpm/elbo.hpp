// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "esddpm/basegen.hpp"
#include "esddpm/diffusion.hpp"
#include "esddpm/rng.hpp"
#include "esddpm/schedule.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

/// Monte-Carlo mean with its standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// KL(N(m1, diag v1) || N(m2, diag v2)), summed over coordinates.
double gaussian_kl(const Vector& mean1, const Vector& var1, const Vector& mean2, const Vector& var2);
/// Isotropic variant.
double gaussian_kl(const Vector& mean1, double var1, const Vector& mean2, double var2);

struct DiagonalGaussian {
    Vector mean;
    Vector var;
};

/// Encoder q(z | x^0) and decoder f(z) seen by the L_VAE term.
class LatentVariableModel {
public:
    virtual ~LatentVariableModel() = default;
    virtual DiagonalGaussian encode(const Vector& x0) const = 0;
    virtual Vector decode(const Vector& z) const = 0;
};

/// Gaussian reverse transition p(x^{t-1} | x^t) = N(mean(x^t, t), variance(t) I).
class ReverseKernel {
public:
    virtual ~ReverseKernel() = default;
    virtual Vector mean(const Vector& xt, Step t) const = 0;
    virtual double variance(Step t) const = 0;
};

class VaeLatentModel final : public LatentVariableModel {
public:
    VaeLatentModel(const VaeParams& vae, Label c = std::nullopt) : vae_(vae), label_(c) {}
    DiagonalGaussian encode(const Vector& x0) const override;
    Vector decode(const Vector& z) const override;

private:
    const VaeParams& vae_;
    Label label_;
};

/// The trained denoiser as a reverse kernel. The t = 1 likelihood uses
/// sigma_1^2 = beta_1 when the posterior variance at t = 1 is zero.
class DenoiserKernel final : public ReverseKernel {
public:
    DenoiserKernel(const DiffusionModel& model, Label c = std::nullopt) : model_(model), label_(c) {}
    Vector mean(const Vector& xt, Step t) const override;
    double variance(Step t) const override;

private:
    const DiffusionModel& model_;
    Label label_;
};

/// KL(q(z|x0) || N(0, I)) in closed form plus a Monte-Carlo estimate of
/// E_q C1 ||x0 - f(z)||^2 with C1 = alpha_bar_T' / (2 (1 - alpha_bar_T')).
Estimate eval_l_vae(const LatentVariableModel& latent, const Vector& x0, const NoiseSchedule& schedule,
                    Step horizon, int mc_draws, Rng& rng);
Estimate eval_l_vae(const VaeParams& vae, const Vector& x0, const NoiseSchedule& schedule, Step horizon,
                    int mc_draws, Rng& rng, Label c = std::nullopt);

/// sum_{t=2}^{T'} E_{q(x^t|x^0)} KL(q(x^{t-1}|x^t,x^0) || p(x^{t-1}|x^t))
///   - E_{q(x^1|x^0)} log p(x^0 | x^1),
/// each expectation estimated from its own `mc_draws` draws.
Estimate eval_l_ddpm(const ReverseKernel& kernel, const NoiseSchedule& schedule, const Vector& x0, Step horizon,
                     int mc_draws, Rng& rng);
Estimate eval_l_ddpm(const DiffusionModel& model, const Vector& x0, int mc_draws, Rng& rng,
                     Label c = std::nullopt);

// ---------------------------------------------------------------------------
// Tractable 1-D linear-Gaussian instance

struct LinearReverse {
    double gain = 1.0;
    double shift = 0.0;
    double variance = 1.0;
};

/// z ~ N(0,1); x^T' ~ N(sqrt(ab) (a z + b), 1 - ab); x^{t-1} ~ N(g_t x^t + k_t, s_t).
/// Encoder q(z | x0) = N(encoder_gain x0 + encoder_shift, encoder_var).
struct LinearGaussianInstance {
    NoiseSchedule schedule = NoiseSchedule::linear(1);
    Step horizon = 1;
    double decoder_scale = 1.0;
    double decoder_shift = 0.0;
    double encoder_gain = 0.0;
    double encoder_shift = 0.0;
    double encoder_var = 1.0;
    std::vector<LinearReverse> reverse;  // entry t-1 describes step t
    double x0 = 0.0;

    void validate() const;
};

class LinearLatentModel final : public LatentVariableModel {
public:
    explicit LinearLatentModel(const LinearGaussianInstance& inst) : inst_(inst) {}
    DiagonalGaussian encode(const Vector& x0) const override;
    Vector decode(const Vector& z) const override;

private:
    const LinearGaussianInstance& inst_;
};

class LinearReverseKernel final : public ReverseKernel {
public:
    explicit LinearReverseKernel(const LinearGaussianInstance& inst) : inst_(inst) {}
    Vector mean(const Vector& xt, Step t) const override;
    double variance(Step t) const override;

private:
    const LinearGaussianInstance& inst_;
};

/// log p(x^0) of the instance by chaining Gaussian marginals.
double exact_log_likelihood(const LinearGaussianInstance& inst);

struct ElboReport {
    double l_vae = 0.0;
    double l_ddpm = 0.0;
    double bound = 0.0;  // -(l_vae + l_ddpm)
    std::optional<double> exact_loglik;
    std::optional<double> gap;  // exact_loglik - bound
    double mc_std_error = 0.0;

    /// gap >= -3 stderr (true when no exact value is known).
    bool bound_holds() const { return !gap.has_value() || *gap >= -3.0 * mc_std_error; }
};

ElboReport verify_elbo_bound(const LinearGaussianInstance& inst, int mc_draws, Rng& rng);

/// Instance whose generative chain equals the forward process started from
/// data N(data_mean, data_var): decoder f(z) = sqrt(data_var) z + data_mean,
/// reverse kernels are the exact reverse conditionals, and the encoder is the
/// best Gaussian q(z | x0) of the family. The remaining gap is r / (2 (1 + r))
/// with r = ab data_var / (1 - ab), ab = alpha_bar_T'.
LinearGaussianInstance exact_posterior_instance(NoiseSchedule schedule, Step horizon, double data_mean,
                                                double data_var, double x0);

/// Random well-posed instance with T' in 1..4.
LinearGaussianInstance random_linear_instance(Rng& rng);

}  // namespace esddpm
