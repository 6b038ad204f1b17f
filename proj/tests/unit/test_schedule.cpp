// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "esddpm/errors.hpp"
#include "esddpm/rng.hpp"
#include "esddpm/schedule.hpp"
#include "oracles.hpp"

namespace esddpm {
namespace {

NoiseSchedule two_step() { return NoiseSchedule::from_betas({0.1, 0.2}); }

TEST(Schedule, LinearEndpoints) {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    EXPECT_EQ(s.horizon(), 1000);
    EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
    EXPECT_DOUBLE_EQ(s.beta(1000), 0.02);
    EXPECT_DOUBLE_EQ(s.alpha_bar(0), 1.0);
}

TEST(Schedule, RejectsInvalidBetas) {
    EXPECT_THROW(NoiseSchedule::from_betas({}), Error);
    EXPECT_THROW(NoiseSchedule::from_betas({0.1, 0.0}), Error);
    EXPECT_THROW(NoiseSchedule::from_betas({0.1, 1.0}), Error);
    EXPECT_THROW(NoiseSchedule::linear(10, 0.02, 0.01), Error);
    EXPECT_THROW(NoiseSchedule::linear(0), Error);
}

TEST(Schedule, IndexChecks) {
    const NoiseSchedule s = two_step();
    EXPECT_THROW(s.beta(0), IndexOutOfRange);
    EXPECT_THROW(s.beta(3), IndexOutOfRange);
    EXPECT_THROW(s.alpha_bar(-1), IndexOutOfRange);
}

TEST(Schedule, CumulativeTableMatchesFreshProduct) {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    for (Step t = 1; t <= 1000; ++t) {
        double prod = 1.0;
        for (Step k = 1; k <= t; ++k) {
            prod *= 1.0 - s.beta(k);
        }
        EXPECT_NEAR(s.alpha_bar(t), prod, 8 * std::numeric_limits<double>::epsilon() * prod) << "t=" << t;
        EXPECT_NEAR(s.one_minus_alpha_bar(t), 1.0 - prod, 1e-12);
    }
}

TEST(Schedule, DiffuseToZeroIsIdentity) {
    const NoiseSchedule s = two_step();
    const Vector x0 = Vector::Random(3);
    EXPECT_EQ(diffuse_to(s, x0, 0, Vector::Random(3)), x0);
}

TEST(Schedule, DiffuseToNoiselessCase) {
    const Vector out = diffuse_to(two_step(), Vector{{1.0, 0.0}}, 2, Vector::Zero(2));
    EXPECT_NEAR(out[0], std::sqrt(0.72), 1e-15);
    EXPECT_NEAR(out[0], 0.848528137423857, 1e-12);
    EXPECT_EQ(out[1], 0.0);
}

TEST(Schedule, DiffuseToDimensionMismatch) {
    EXPECT_THROW(diffuse_to(two_step(), Vector(Vector::Zero(2)), 1, Vector(Vector::Zero(3))), DimensionMismatch);
}

TEST(Schedule, DiffuseToMonteCarloMoments) {
    const NoiseSchedule s = NoiseSchedule::linear(100);
    const Vector x0{{0.8, -1.5}};
    const Step t = 40;
    Rng rng(11);
    const int n = 100000;
    Vector sum = Vector::Zero(2);
    Matrix sum2 = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const Vector x = diffuse_to(s, x0, t, standard_normal(rng, 2));
        sum += x;
        sum2 += x * x.transpose();
    }
    const Vector mean = sum / n;
    const Matrix cov = sum2 / n - mean * mean.transpose();
    const double v = s.one_minus_alpha_bar(t);
    const double se_mean = std::sqrt(v / n);
    const double se_var = v * std::sqrt(2.0 / n);
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(mean[k], std::sqrt(s.alpha_bar(t)) * x0[k], 4 * se_mean);
        EXPECT_NEAR(cov(k, k), v, 4 * se_var);
    }
    EXPECT_NEAR(cov(0, 1), 0.0, 4 * v / std::sqrt(n));
}

TEST(Schedule, ForwardStepClosedForms) {
    const NoiseSchedule s = two_step();
    const Vector x{{2.0, -1.0}};
    EXPECT_EQ(forward_step(s, x, 2, Vector::Zero(2)), std::sqrt(0.8) * x);
    const Vector out = forward_step(s, Vector::Zero(2), 2, Vector::Ones(2));
    EXPECT_DOUBLE_EQ(out[0], std::sqrt(0.2));
    EXPECT_DOUBLE_EQ(out[1], std::sqrt(0.2));
    EXPECT_THROW(forward_step(s, x, 0, Vector::Zero(2)), IndexOutOfRange);
    EXPECT_THROW(forward_step(s, x, 3, Vector::Zero(2)), IndexOutOfRange);
}

// Composed forward steps reproduce the marginal for every t of a short schedule.
TEST(Schedule, ChainMatchesMarginalForEveryStep) {
    const NoiseSchedule s = NoiseSchedule::from_betas({0.05, 0.1, 0.15, 0.2, 0.3, 0.1, 0.05, 0.2, 0.4, 0.5});
    Rng rng(5);
    const Vector x0{{1.2, -0.4}};
    const int n = 100000;
    std::vector<Vector> sums(11, Vector::Zero(2));
    std::vector<Vector> sq(11, Vector::Zero(2));
    for (int i = 0; i < n; ++i) {
        Vector x = x0;
        for (Step t = 1; t <= 10; ++t) {
            x = forward_step(s, x, t, standard_normal(rng, 2));
            sums[t] += x;
            sq[t] += x.cwiseProduct(x);
        }
    }
    for (Step t = 1; t <= 10; ++t) {
        const MarginalParams m = marginal(s, t);
        const Vector mean = sums[t] / n;
        const Vector var = sq[t] / n - mean.cwiseProduct(mean);
        for (int k = 0; k < 2; ++k) {
            EXPECT_NEAR(mean[k], m.scale * x0[k], 4 * std::sqrt(m.noise_var / n)) << "t=" << t;
            EXPECT_NEAR(var[k], m.noise_var, 4 * m.noise_var * std::sqrt(2.0 / n)) << "t=" << t;
        }
    }
}

TEST(Schedule, PosteriorAtStepOneIsX0) {
    const Vector x0{{0.3, -2.0}};
    const GaussianPosterior p = posterior_params(two_step(), 1, x0, Vector{{5.0, 7.0}});
    EXPECT_EQ(p.mean, x0);
    EXPECT_EQ(p.variance, 0.0);
}

TEST(Schedule, PosteriorTwoStepExample) {
    const GaussianPosterior p = posterior_params(two_step(), 2, Vector::Constant(1, 1.0), Vector::Constant(1, 0.5));
    const double expected = (std::sqrt(0.9) * 0.2 + std::sqrt(0.8) * 0.1 * 0.5) / 0.28;
    EXPECT_NEAR(p.mean[0], expected, 1e-15);
    const verify::Moments q = verify::quadrature_posterior(two_step(), 2, 1.0, 0.5);
    EXPECT_NEAR(p.mean[0], q.mean, 1e-6 * std::abs(q.mean));
    EXPECT_NEAR(p.variance, q.variance, 1e-6 * q.variance);
    EXPECT_NEAR(p.variance, 0.2 * 0.1 / 0.28, 1e-15);
}

TEST(Schedule, PosteriorSymmetricZero) {
    const GaussianPosterior p = posterior_params(NoiseSchedule::linear(50), 30, Vector::Zero(2), Vector::Zero(2));
    EXPECT_EQ(p.mean, Vector::Zero(2));
}

TEST(Schedule, PosteriorMatchesQuadratureOnRandomTuples) {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    Rng rng(21);
    std::uniform_int_distribution<Step> pick(2, 1000);
    for (int i = 0; i < 100; ++i) {
        const Step t = pick(rng);
        const double x0 = 6.0 * uniform01(rng) - 3.0;
        const double xt = 6.0 * uniform01(rng) - 3.0;
        const GaussianPosterior p = posterior_params(s, t, Vector::Constant(1, x0), Vector::Constant(1, xt));
        const verify::Moments q = verify::quadrature_posterior(s, t, x0, xt);
        EXPECT_LT(std::abs(p.mean[0] - q.mean), 1e-6 * std::max(std::abs(q.mean), 1e-3)) << "t=" << t;
        EXPECT_LT(std::abs(p.variance - q.variance), 1e-6 * q.variance) << "t=" << t;
    }
}

TEST(Schedule, VanishingBetaIsDegenerate) {
    // alpha_bar would stop decreasing, so 1 - alpha_bar cannot be trusted downstream.
    EXPECT_THROW(NoiseSchedule::from_betas({1e-300}), DegenerateSchedule);
    EXPECT_THROW(NoiseSchedule::from_betas({0.5, 1e-20}), DegenerateSchedule);
}

}  // namespace
}  // namespace esddpm
