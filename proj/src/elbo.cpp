// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/elbo.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

// Running mean and variance (Welford).
class Accumulator {
public:
    void add(double x) {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }
    double mean() const { return mean_; }
    /// Variance of the mean.
    double mean_variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_) : 0.0; }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

double gaussian_log_density(const Vector& x, const Vector& mean, double var) {
    const double d = static_cast<double>(x.size());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi * var) + (x - mean).squaredNorm() / var);
}

}  // namespace

double gaussian_kl(const Vector& m1, const Vector& v1, const Vector& m2, const Vector& v2) {
    ESDDPM_CHECK(m1.size() == v1.size() && m1.size() == m2.size() && m1.size() == v2.size(), DimensionMismatch,
                 "gaussian_kl: dimensions differ");
    ESDDPM_CHECK((v1.array() > 0.0).all() && (v2.array() > 0.0).all(), InvalidArgument,
                 "gaussian_kl: variances must be positive");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < m1.size(); ++i) {
        const double diff = m2[i] - m1[i];
        kl += 0.5 * (v1[i] / v2[i] + diff * diff / v2[i] - 1.0 + std::log(v2[i] / v1[i]));
    }
    return kl;
}

double gaussian_kl(const Vector& m1, double v1, const Vector& m2, double v2) {
    ESDDPM_CHECK(m1.size() == m2.size(), DimensionMismatch, "gaussian_kl: dimensions differ");
    ESDDPM_CHECK(v1 > 0.0 && v2 > 0.0, InvalidArgument, "gaussian_kl: variances must be positive");
    const double d = static_cast<double>(m1.size());
    return 0.5 * (d * (v1 / v2 - 1.0 + std::log(v2 / v1)) + (m2 - m1).squaredNorm() / v2);
}

DiagonalGaussian VaeLatentModel::encode(const Vector& x0) const {
    const VaeEncoding enc = vae_encode(vae_, x0, label_);
    return {enc.mean, enc.log_var.array().exp().matrix()};
}

Vector VaeLatentModel::decode(const Vector& z) const { return vae_decode(vae_, z, label_); }

Vector DenoiserKernel::mean(const Vector& xt, Step t) const {
    return reverse_mean(model_, xt, t, predict_eps(model_.net, xt, t, label_));
}

double DenoiserKernel::variance(Step t) const {
    if (t == 1) {
        return model_.schedule.beta(1);
    }
    return reverse_variance(model_, t, t - 1);
}

Estimate eval_l_vae(const LatentVariableModel& latent, const Vector& x0, const NoiseSchedule& schedule,
                    Step horizon, int mc_draws, Rng& rng) {
    ESDDPM_CHECK(mc_draws >= 1, InvalidArgument, "mc_draws must be positive");
    const double c1 = reconstruction_weight(schedule, horizon);
    const DiagonalGaussian q = latent.encode(x0);
    const auto L = q.mean.size();
    const double prior_kl = gaussian_kl(q.mean, q.var, Vector::Zero(L), Vector::Ones(L));
    const Vector sd = q.var.cwiseSqrt();
    Accumulator recon;
    for (int i = 0; i < mc_draws; ++i) {
        const Vector z = q.mean + sd.cwiseProduct(standard_normal(rng, L));
        recon.add(c1 * (x0 - latent.decode(z)).squaredNorm());
    }
    return {prior_kl + recon.mean(), std::sqrt(recon.mean_variance())};
}

Estimate eval_l_vae(const VaeParams& vae, const Vector& x0, const NoiseSchedule& schedule, Step horizon,
                    int mc_draws, Rng& rng, Label c) {
    return eval_l_vae(VaeLatentModel(vae, c), x0, schedule, horizon, mc_draws, rng);
}

Estimate eval_l_ddpm(const ReverseKernel& kernel, const NoiseSchedule& schedule, const Vector& x0, Step horizon,
                     int mc_draws, Rng& rng) {
    ESDDPM_CHECK(mc_draws >= 1, InvalidArgument, "mc_draws must be positive");
    ESDDPM_CHECK(horizon >= 1 && horizon <= schedule.horizon(), InvalidArgument,
                 "L_DDPM horizon must satisfy 1 <= T' <= T");
    const auto d = x0.size();
    double total = 0.0;
    double variance = 0.0;
    for (Step t = 2; t <= horizon; ++t) {
        Accumulator term;
        const double p_var = kernel.variance(t);
        for (int i = 0; i < mc_draws; ++i) {
            const Vector xt = diffuse_to(schedule, x0, t, standard_normal(rng, d));
            const GaussianPosterior post = posterior_params(schedule, t, x0, xt);
            const double kl = gaussian_kl(post.mean, post.variance, kernel.mean(xt, t), p_var);
            ESDDPM_CHECK(kl >= -1e-12, NumericalError, "negative KL term");
            term.add(kl);
        }
        total += term.mean();
        variance += term.mean_variance();
    }
    Accumulator nll;
    const double var1 = kernel.variance(1);
    for (int i = 0; i < mc_draws; ++i) {
        const Vector x1 = diffuse_to(schedule, x0, 1, standard_normal(rng, d));
        nll.add(-gaussian_log_density(x0, kernel.mean(x1, 1), var1));
    }
    total += nll.mean();
    variance += nll.mean_variance();
    return {total, std::sqrt(variance)};
}

Estimate eval_l_ddpm(const DiffusionModel& model, const Vector& x0, int mc_draws, Rng& rng, Label c) {
    return eval_l_ddpm(DenoiserKernel(model, c), model.schedule, x0, model.trained_horizon, mc_draws, rng);
}

// ---------------------------------------------------------------------------
// Linear-Gaussian instance

void LinearGaussianInstance::validate() const {
    ESDDPM_CHECK(horizon >= 1 && horizon <= schedule.horizon(), InvalidArgument,
                 "instance horizon must satisfy 1 <= T' <= T");
    ESDDPM_CHECK(reverse.size() == static_cast<std::size_t>(horizon), InvalidArgument,
                 "instance needs one reverse kernel per step");
    ESDDPM_CHECK(encoder_var > 0.0, InvalidArgument, "encoder variance must be positive");
    for (const auto& r : reverse) {
        ESDDPM_CHECK(r.variance > 0.0, InvalidArgument, "reverse kernel variances must be positive");
    }
    ESDDPM_CHECK(std::isfinite(decoder_scale) && std::isfinite(decoder_shift) && std::isfinite(x0), InvalidArgument,
                 "instance parameters must be finite");
}

DiagonalGaussian LinearLatentModel::encode(const Vector& x0) const {
    ESDDPM_CHECK(x0.size() == 1, DimensionMismatch, "linear instance is one-dimensional");
    return {Vector::Constant(1, inst_.encoder_gain * x0[0] + inst_.encoder_shift),
            Vector::Constant(1, inst_.encoder_var)};
}

Vector LinearLatentModel::decode(const Vector& z) const {
    return Vector::Constant(1, inst_.decoder_scale * z[0] + inst_.decoder_shift);
}

Vector LinearReverseKernel::mean(const Vector& xt, Step t) const {
    const LinearReverse& r = inst_.reverse.at(static_cast<std::size_t>(t - 1));
    return (r.gain * xt.array() + r.shift).matrix();
}

double LinearReverseKernel::variance(Step t) const { return inst_.reverse.at(static_cast<std::size_t>(t - 1)).variance; }

double exact_log_likelihood(const LinearGaussianInstance& inst) {
    inst.validate();
    const double ab = inst.schedule.alpha_bar(inst.horizon);
    double mean = std::sqrt(ab) * inst.decoder_shift;
    double var = ab * inst.decoder_scale * inst.decoder_scale + inst.schedule.one_minus_alpha_bar(inst.horizon);
    for (Step t = inst.horizon; t >= 1; --t) {
        const LinearReverse& r = inst.reverse[static_cast<std::size_t>(t - 1)];
        mean = r.gain * mean + r.shift;
        var = r.gain * r.gain * var + r.variance;
    }
    const double diff = inst.x0 - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
}

ElboReport verify_elbo_bound(const LinearGaussianInstance& inst, int mc_draws, Rng& rng) {
    inst.validate();
    const Vector x0 = Vector::Constant(1, inst.x0);
    const Estimate vae = eval_l_vae(LinearLatentModel(inst), x0, inst.schedule, inst.horizon, mc_draws, rng);
    const Estimate ddpm = eval_l_ddpm(LinearReverseKernel(inst), inst.schedule, x0, inst.horizon, mc_draws, rng);
    ElboReport report;
    report.l_vae = vae.value;
    report.l_ddpm = ddpm.value;
    report.bound = -(vae.value + ddpm.value);
    report.exact_loglik = exact_log_likelihood(inst);
    report.gap = *report.exact_loglik - report.bound;
    report.mc_std_error = std::hypot(vae.std_error, ddpm.std_error);
    return report;
}

LinearGaussianInstance exact_posterior_instance(NoiseSchedule schedule, Step horizon, double data_mean,
                                                double data_var, double x0) {
    ESDDPM_CHECK(data_var > 0.0, InvalidArgument, "data variance must be positive");
    LinearGaussianInstance inst;
    inst.schedule = std::move(schedule);
    inst.horizon = horizon;
    inst.x0 = x0;
    inst.decoder_scale = std::sqrt(data_var);
    inst.decoder_shift = data_mean;

    // Exact reverse conditionals q(x^{t-1} | x^t) for x^0 ~ N(data_mean, data_var).
    const NoiseSchedule& s = inst.schedule;
    for (Step t = 1; t <= horizon; ++t) {
        const double m_prev = std::sqrt(s.alpha_bar(t - 1)) * data_mean;
        const double v_prev = s.alpha_bar(t - 1) * data_var + s.one_minus_alpha_bar(t - 1);
        const double a = s.alpha(t);
        const double b = s.beta(t);
        const double denom = a * v_prev + b;
        const double gain = std::sqrt(a) * v_prev / denom;
        inst.reverse.push_back({gain, m_prev - gain * std::sqrt(a) * m_prev, v_prev * b / denom});
    }

    // Best encoder: p(z | x^T') averaged over q(x^T' | x0).
    const double ab = s.alpha_bar(horizon);
    const double noise = s.one_minus_alpha_bar(horizon);
    const double r = ab * data_var / noise;
    const double kappa = std::sqrt(ab) * inst.decoder_scale / noise / (1.0 + r);
    inst.encoder_gain = kappa * std::sqrt(ab);
    inst.encoder_shift = -kappa * std::sqrt(ab) * data_mean;
    inst.encoder_var = 1.0 / (1.0 + r);
    inst.validate();
    return inst;
}

LinearGaussianInstance random_linear_instance(Rng& rng) {
    std::uniform_int_distribution<int> pick_horizon(1, 4);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const Step horizon = pick_horizon(rng);
    std::vector<double> betas;
    for (Step t = 1; t <= horizon; ++t) {
        betas.push_back(uniform(0.01, 0.5));
    }
    LinearGaussianInstance inst;
    inst.schedule = NoiseSchedule::from_betas(std::move(betas));
    inst.horizon = horizon;
    inst.decoder_scale = uniform(0.3, 2.0) * (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    inst.decoder_shift = uniform(-1.0, 1.0);
    inst.encoder_gain = uniform(-1.0, 1.0);
    inst.encoder_shift = uniform(-0.5, 0.5);
    inst.encoder_var = uniform(0.1, 1.5);
    for (Step t = 1; t <= horizon; ++t) {
        inst.reverse.push_back({uniform(0.5, 1.5), uniform(-0.3, 0.3), uniform(0.01, 0.5)});
    }
    inst.x0 = uniform(-2.0, 2.0);
    inst.validate();
    return inst;
}

}  // namespace esddpm
