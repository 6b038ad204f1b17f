// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/schedule.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

void check_step(const NoiseSchedule& s, Step t, Step lo) {
    if (t < lo || t > s.horizon()) {
        throw IndexOutOfRange("step " + std::to_string(t) + " outside [" + std::to_string(lo) +
                              ", " + std::to_string(s.horizon()) + "]");
    }
}

}  // namespace

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    ESDDPM_CHECK(!betas.empty(), InvalidArgument, "schedule needs at least one step");
    NoiseSchedule s;
    const std::size_t T = betas.size();
    s.alphas_.resize(T);
    s.alpha_bars_.resize(T + 1);
    s.one_minus_alpha_bars_.resize(T + 1);
    s.alpha_bars_[0] = 1.0;
    s.one_minus_alpha_bars_[0] = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
        const double b = betas[i];
        if (!(b > 0.0 && b < 1.0)) {
            throw InvalidArgument("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) +
                                  " not in (0, 1)");
        }
        s.alphas_[i] = 1.0 - b;
        s.alpha_bars_[i + 1] = s.alpha_bars_[i] * s.alphas_[i];
        s.one_minus_alpha_bars_[i + 1] = s.one_minus_alpha_bars_[i] + s.alpha_bars_[i] * b;
        if (!(s.alpha_bars_[i + 1] > 0.0) || !(s.alpha_bars_[i + 1] < s.alpha_bars_[i])) {
            throw DegenerateSchedule("alpha_bar not strictly decreasing and positive at step " +
                                     std::to_string(i + 1));
        }
    }
    s.betas_ = std::move(betas);
    return s;
}

NoiseSchedule NoiseSchedule::linear(int horizon, double beta_start, double beta_end) {
    ESDDPM_CHECK(horizon >= 1, InvalidArgument, "horizon must be >= 1");
    ESDDPM_CHECK(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, InvalidArgument,
                 "linear schedule needs 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(horizon));
    for (int i = 0; i < horizon; ++i) {
        const double frac = horizon == 1 ? 0.0 : static_cast<double>(i) / (horizon - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
    }
    betas.back() = beta_end;
    return from_betas(std::move(betas));
}

NoiseSchedule build_linear_schedule(int horizon, double beta_start, double beta_end) {
    return NoiseSchedule::linear(horizon, beta_start, beta_end);
}

double NoiseSchedule::beta(Step t) const {
    check_step(*this, t, 1);
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha(Step t) const {
    check_step(*this, t, 1);
    return alphas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(Step t) const {
    check_step(*this, t, 0);
    return alpha_bars_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::one_minus_alpha_bar(Step t) const {
    check_step(*this, t, 0);
    return one_minus_alpha_bars_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::beta_tilde(Step t) const {
    check_step(*this, t, 1);
    const double denom = one_minus_alpha_bar(t);
    if (!(denom > std::numeric_limits<double>::min())) {
        throw DegenerateSchedule("1 - alpha_bar underflows at step " + std::to_string(t));
    }
    return beta(t) * one_minus_alpha_bar(t - 1) / denom;
}

MarginalParams marginal(const NoiseSchedule& schedule, Step t) {
    return {std::sqrt(schedule.alpha_bar(t)), schedule.one_minus_alpha_bar(t)};
}

Vector diffuse_to(const NoiseSchedule& schedule, const Vector& x0, Step t, const Vector& eps) {
    ESDDPM_CHECK(x0.size() == eps.size(), DimensionMismatch, "diffuse_to: x0 and eps differ in size");
    const MarginalParams m = marginal(schedule, t);
    return m.scale * x0 + std::sqrt(m.noise_var) * eps;
}

Matrix diffuse_to(const NoiseSchedule& schedule, const Matrix& x0, Step t, const Matrix& eps) {
    ESDDPM_CHECK(x0.rows() == eps.rows() && x0.cols() == eps.cols(), DimensionMismatch,
                 "diffuse_to: x0 and eps differ in shape");
    const MarginalParams m = marginal(schedule, t);
    return m.scale * x0 + std::sqrt(m.noise_var) * eps;
}

Vector forward_step(const NoiseSchedule& schedule, const Vector& x_prev, Step t, const Vector& eps) {
    ESDDPM_CHECK(x_prev.size() == eps.size(), DimensionMismatch,
                 "forward_step: x_prev and eps differ in size");
    const double b = schedule.beta(t);
    return std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * eps;
}

GaussianPosterior posterior_params(const NoiseSchedule& schedule, Step t, const Vector& x0,
                                   const Vector& xt) {
    ESDDPM_CHECK(x0.size() == xt.size(), DimensionMismatch, "posterior_params: x0 and xt differ in size");
    check_step(schedule, t, 1);
    const double denom = schedule.one_minus_alpha_bar(t);
    if (!(denom > std::numeric_limits<double>::min())) {
        throw DegenerateSchedule("1 - alpha_bar underflows at step " + std::to_string(t));
    }
    const double b = schedule.beta(t);
    const double c0 = std::sqrt(schedule.alpha_bar(t - 1)) * b / denom;
    const double ct = std::sqrt(schedule.alpha(t)) * schedule.one_minus_alpha_bar(t - 1) / denom;
    return {c0 * x0 + ct * xt, schedule.beta_tilde(t)};
}

}  // namespace esddpm
