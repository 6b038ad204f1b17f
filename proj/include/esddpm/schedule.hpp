// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "esddpm/types.hpp"

namespace esddpm {

/// Variance schedule of a discrete diffusion chain.
///
/// Steps are 1-based: beta(1) .. beta(T). alpha_bar(0) == 1 by convention.
/// Cumulative tables are computed once at construction; the object is
/// immutable afterwards and safe to share across threads.
class NoiseSchedule {
public:
    /// Builds a schedule from explicit betas. Requires 0 < beta < 1 for every
    /// step and a strictly decreasing, positive alpha_bar table.
    static NoiseSchedule from_betas(std::vector<double> betas);

    /// Betas linearly interpolated from beta_start to beta_end, both inclusive.
    static NoiseSchedule linear(int horizon, double beta_start = 1e-4, double beta_end = 0.02);

    int horizon() const { return static_cast<int>(betas_.size()); }

    double beta(Step t) const;
    double alpha(Step t) const;
    double alpha_bar(Step t) const;
    /// 1 - alpha_bar(t), accumulated without cancellation for small t.
    double one_minus_alpha_bar(Step t) const;
    /// Posterior variance beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t).
    double beta_tilde(Step t) const;

    std::span<const double> betas() const { return betas_; }

private:
    NoiseSchedule() = default;

    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;            // index 0..T
    std::vector<double> one_minus_alpha_bars_;  // index 0..T
};

NoiseSchedule build_linear_schedule(int horizon, double beta_start, double beta_end);

struct MarginalParams {
    double scale = 1.0;      // sqrt(alpha_bar_t)
    double noise_var = 0.0;  // 1 - alpha_bar_t
};

/// Parameters of q(x^t | x^0).
MarginalParams marginal(const NoiseSchedule& schedule, Step t);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
Vector diffuse_to(const NoiseSchedule& schedule, const Vector& x0, Step t, const Vector& eps);
/// Column-wise diffuse_to for a batch.
Matrix diffuse_to(const NoiseSchedule& schedule, const Matrix& x0, Step t, const Matrix& eps);

/// One transition of q(x^t | x^{t-1}): sqrt(1 - beta_t) x_prev + sqrt(beta_t) eps.
Vector forward_step(const NoiseSchedule& schedule, const Vector& x_prev, Step t, const Vector& eps);

struct GaussianPosterior {
    Vector mean;
    double variance = 0.0;
};

/// The tractable posterior q(x^{t-1} | x^t, x^0) for 1 <= t <= T.
GaussianPosterior posterior_params(const NoiseSchedule& schedule, Step t, const Vector& x0,
                                   const Vector& xt);

}  // namespace esddpm
