// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations used to check the engine.

#pragma once

#include <functional>
#include <span>

#include "esddpm/elbo.hpp"
#include "esddpm/metrics.hpp"
#include "esddpm/nn.hpp"
#include "esddpm/schedule.hpp"

namespace esddpm::verify {

/// Network with every tensor (including the output layer) drawn U(-scale, scale).
Network random_network(const NetworkConfig& config, Rng& rng, double scale = 0.5);

/// Central differences of f at `at`, one parameter at a time.
GradientBuffer central_difference(const ParameterTensors& at,
                                  const std::function<double(const ParameterTensors&)>& f, double h = 1e-5);

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).
double max_relative_error(const ParameterTensors& analytic, const ParameterTensors& numeric, double floor = 1e-7);

/// Gradient check of sum <upstream, net(x)> over a batch.
double network_gradient_error(const Network& net, const Matrix& x, std::span<const Step> steps,
                              const Labels& labels, const Matrix& upstream);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance of q(x^{t-1} | x^t, x^0) in 1-D by numerical
/// integration of q(x^{t-1} | x^0) q(x^t | x^{t-1}). Requires t >= 2.
Moments quadrature_posterior(const NoiseSchedule& schedule, Step t, double x0, double xt);

struct AnalyticBound {
    double l_vae = 0.0;
    double l_ddpm = 0.0;
    double bound() const { return -(l_vae + l_ddpm); }
};

/// Closed-form expectations of both loss terms for a linear-Gaussian instance.
AnalyticBound analytic_linear_bound(const LinearGaussianInstance& inst);

/// r / (2 (1 + r)), r = alpha_bar a^2 / (1 - alpha_bar).
double best_in_family_gap(const LinearGaussianInstance& inst);

// Brute-force metric references: plain loops, no shared helpers with the engine.
double energy_distance_reference(const SampleSet& a, const SampleSet& b);
double mmd_reference(const SampleSet& a, const SampleSet& b, double bandwidth, bool biased);
PrecisionRecall knn_reference(const SampleSet& generated, const SampleSet& reference, int k);
/// W1 through the quantile functions: integral over u of |Qa(u) - Qb(u)|.
double w1_quantile_reference(std::vector<double> a, std::vector<double> b);

/// Population energy distance between N(0, s^2) and N(mu, s^2) in 1-D.
double gaussian_energy_distance_1d(double mu, double sigma);

}  // namespace esddpm::verify
