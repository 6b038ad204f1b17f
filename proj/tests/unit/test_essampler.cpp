// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "esddpm/errors.hpp"
#include "esddpm/essampler.hpp"
#include "oracles.hpp"

namespace esddpm {
namespace {

DiffusionModel model_for(int T, Step horizon, bool random, int d = 2, int classes = 0) {
    Rng init(1);
    NetworkConfig cfg = default_denoiser_config(d, T, classes);
    cfg.hidden = {8};
    DiffusionModel m = DiffusionModel::create(NoiseSchedule::linear(T), horizon, cfg, init);
    if (random) {
        m.net = verify::random_network(cfg, init, 0.3);
    }
    return m;
}

BaseGenerator point_mass(const Vector& at) {
    OracleData o;
    o.data = at;
    o.jitter = 0.0;
    return BaseGenerator::from_oracle(o);
}

TEST(Plan, FullPlanVisitsEveryStep) {
    const SamplerPlan p = full_plan(5);
    EXPECT_EQ(p.sequence, (std::vector<Step>{5, 4, 3, 2, 1}));
    EXPECT_TRUE(full_plan(0).sequence.empty());
}

TEST(Plan, UniformPlanEndpoints) {
    for (int T : {1, 2, 7, 100, 1000}) {
        for (int k : {1, 2, 3, 10, 50}) {
            if (k > T || (k == 1 && T > 1)) {
                EXPECT_THROW(uniform_plan(T, k), InvalidArgument);
                continue;
            }
            const SamplerPlan p = uniform_plan(T, k);
            EXPECT_EQ(p.sequence.front(), T);
            EXPECT_EQ(p.sequence.back(), 1);
            EXPECT_EQ(static_cast<int>(p.sequence.size()), k);
        }
    }
    EXPECT_EQ(uniform_plan(100, 10).sequence, (std::vector<Step>{100, 89, 78, 67, 56, 45, 34, 23, 12, 1}));
}

TEST(Plan, ValidateRejectsBrokenSequences) {
    SamplerPlan p{4, {4, 2, 2, 1}};
    EXPECT_THROW(p.validate(), InvalidArgument);
    p.sequence = {3, 1};
    EXPECT_THROW(p.validate(), InvalidArgument);
    p.sequence = {4, 2};
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = SamplerPlan{0, {1}};
    EXPECT_THROW(p.validate(), InvalidArgument);
    EXPECT_THROW(full_plan(3, SamplerMode::ddim, 1.5), InvalidArgument);
}

TEST(EsSample, ZeroHorizonReturnsBaseSamples) {
    const DiffusionModel model = model_for(20, 10, true);
    GmmParams g;
    g.weights = Vector::Ones(1);
    g.means = Matrix::Zero(2, 1);
    g.variances = Matrix::Ones(2, 1);
    const BaseGenerator gen = BaseGenerator::from_gmm(g);
    Rng rng(5);
    const SampleSet out = es_sample(model, gen, full_plan(0), 30, rng);
    Rng replay(5);
    const std::uint64_t seed = replay();
    for (int i = 0; i < 30; ++i) {
        Rng stream = stream_rng(seed, static_cast<std::uint64_t>(i));
        EXPECT_EQ(out.col(i), generate(gen, stream).eval());
    }
}

TEST(EsSample, ChunkingAndWorkersDoNotChangeOutput) {
    const DiffusionModel model = model_for(50, 20, true);
    const BaseGenerator gen = point_mass(Vector{{0.5, -0.5}});
    SamplingOptions a;
    a.chunk_size = 16;
    SamplingOptions b = a;
    b.workers = 3;
    SamplingOptions c;
    c.chunk_size = 7;
    Rng r1(9), r2(9), r3(9);
    const SampleSet x = es_sample(model, gen, full_plan(20), 100, r1, std::nullopt, a);
    // Same chunks on more threads: bit-identical.
    EXPECT_EQ(x, es_sample(model, gen, full_plan(20), 100, r2, std::nullopt, b));
    // Other chunk widths may reorder the matrix-product arithmetic.
    EXPECT_LT((x - es_sample(model, gen, full_plan(20), 100, r3, std::nullopt, c)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EsSample, CountsOneEvaluationPerPlannedStep) {
    const DiffusionModel model = model_for(100, 100, true);
    const BaseGenerator gen = point_mass(Vector::Zero(2));
    EvalCounter counter;
    SamplingOptions opts;
    opts.counter = &counter;
    Rng rng(1);
    es_sample(model, gen, uniform_plan(100, 10, SamplerMode::ddim), 13, rng, std::nullopt, opts);
    EXPECT_EQ(counter.value(), 130u);
    counter.reset();
    es_sample(model, gen, full_plan(40), 5, rng, std::nullopt, opts);
    EXPECT_EQ(counter.value(), 200u);
}

TEST(EsSample, RejectsMismatches) {
    const DiffusionModel model = model_for(50, 20, false);
    const BaseGenerator gen = point_mass(Vector::Zero(2));
    Rng rng(1);
    EXPECT_THROW(es_sample(model, gen, full_plan(21), 4, rng), InvalidArgument);
    EXPECT_THROW(es_sample(model, point_mass(Vector::Zero(3)), full_plan(10), 4, rng), DimensionMismatch);
    EXPECT_THROW(es_sample(model, gen, full_plan(10), 4, rng, 0), InvalidArgument);
    EXPECT_EQ(es_sample(model, gen, full_plan(10), 0, rng).cols(), 0);
}

TEST(EsSample, ConditionalLabelsPerSample) {
    const DiffusionModel model = model_for(30, 30, true, 2, 3);
    OracleData o;
    o.data = SampleSet{{0.0, 10.0, 20.0}, {0.0, 0.0, 0.0}};
    o.labels = {0, 1, 2};
    o.jitter = 0.0;
    const BaseGenerator gen = BaseGenerator::from_oracle(o, 3);
    Rng rng(4);
    const SampleSet base = es_sample(model, gen, full_plan(0), Labels{2, 0, 1}, rng);
    EXPECT_EQ(base(0, 0), 20.0);
    EXPECT_EQ(base(0, 1), 0.0);
    EXPECT_EQ(base(0, 2), 10.0);
    EXPECT_THROW(es_sample(model, gen, full_plan(5), 3, rng), InvalidArgument);
    EXPECT_EQ(es_sample(model, gen, full_plan(5), 3, rng, 1).cols(), 3);
}

TEST(EsSample, ZeroNetworkDiffusedPointMassMoments) {
    // One-shot diffusion to T' then ancestral steps with eps_hat = 0 and beta variance:
    // mean sqrt(alpha_bar_T') x0 / sqrt(alpha_bar_T'), variance recursion as in the full sampler.
    const int T = 40;
    const Step h = 15;
    Rng init(1);
    NetworkConfig cfg = default_denoiser_config(1, T);
    cfg.hidden = {4};
    const DiffusionModel model =
        DiffusionModel::create(NoiseSchedule::linear(T, 1e-3, 0.05), h, cfg, init, SigmaMode::beta);
    const NoiseSchedule& s = model.schedule;
    const double x0 = 1.5;
    double mean = std::sqrt(s.alpha_bar(h)) * x0;
    double var = s.one_minus_alpha_bar(h);
    for (Step t = h; t >= 2; --t) {
        mean /= std::sqrt(s.alpha(t));
        var = var / s.alpha(t) + s.beta(t);
    }
    mean /= std::sqrt(s.alpha(1));
    var /= s.alpha(1);
    EXPECT_NEAR(mean, x0, 1e-12);
    Rng rng(2);
    const int n = 100000;
    const SampleSet out = es_sample(model, point_mass(Vector::Constant(1, x0)), full_plan(h), n, rng);
    const double m = out.mean();
    const double v = (out.array() - m).square().sum() / (n - 1);
    EXPECT_NEAR(m, mean, 4 * std::sqrt(var / n));
    EXPECT_NEAR(v, var, 4 * var * std::sqrt(2.0 / n));
}

TEST(Ddim, ZeroNetworkJumpRescales) {
    const DiffusionModel model = model_for(100, 100, false);
    const NoiseSchedule& s = model.schedule;
    const Matrix x = Matrix::Random(2, 4);
    const Matrix out = ddim_transition(model, x, 60, 20, 0.0, Matrix::Zero(2, 4), Matrix());
    EXPECT_LT((out - x * std::sqrt(s.alpha_bar(20) / s.alpha_bar(60))).norm(), 1e-12);
    const Matrix final = ddim_transition(model, x, 5, 0, 0.0, Matrix::Zero(2, 4), Matrix());
    EXPECT_LT((final - x / std::sqrt(s.alpha_bar(5))).norm(), 1e-12);
}

TEST(Ddim, EtaOneSingleStepMatchesPosteriorVariance) {
    const DiffusionModel model = model_for(100, 100, false, 1);
    const NoiseSchedule& s = model.schedule;
    const Step t = 30;
    const Matrix x = Matrix::Constant(1, 1, 0.7);
    const Matrix a = ddim_transition(model, x, t, t - 1, 1.0, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
    const Matrix b = ddim_transition(model, x, t, t - 1, 1.0, Matrix::Zero(1, 1), Matrix::Ones(1, 1));
    EXPECT_NEAR((b - a)(0, 0), std::sqrt(s.beta_tilde(t)), 1e-12);
}

TEST(Ddim, EtaZeroIsDeterministic) {
    const DiffusionModel model = model_for(100, 100, true);
    Rng a(1), b(2);
    const Vector x{{0.3, 0.1}};
    EXPECT_EQ(ddim_step(model, x, 50, 10, 0.0, a), ddim_step(model, x, 50, 10, 0.0, b));
}

TEST(RunPlan, AncestralRespacedMeanWithZeroNetwork) {
    const DiffusionModel model = model_for(100, 100, false);
    const NoiseSchedule& s = model.schedule;
    const Matrix x = Matrix::Random(2, 3);
    const Matrix out = ancestral_transition(model, x, 80, 40, Matrix::Zero(2, 3), Matrix::Zero(2, 3));
    EXPECT_LT((out - x * std::sqrt(s.alpha_bar(40) / s.alpha_bar(80))).norm(), 1e-12);
    EXPECT_NEAR(reverse_variance(model, 30, 29), s.beta_tilde(30), 1e-15);
}

TEST(RunPlan, RejectsUntrainedHorizon) {
    const DiffusionModel model = model_for(100, 10, false);
    std::vector<Rng> rngs(1);
    EXPECT_THROW(run_plan(model, full_plan(11), Matrix::Zero(2, 1), rngs, {}), UntrainedStep);
}

TEST(Edit, EmptyMaskLeavesBase) {
    EditRequest r;
    r.base = Vector{{1.0, 2.0, 3.0}};
    r.mask = {false, false, false};
    r.replacement = Vector::Zero(3);
    EXPECT_EQ(r.edited(), r.base);
    r.mask = {false, true, false};
    EXPECT_EQ(r.edited(), (Vector{{1.0, 0.0, 3.0}}));
    r.mask = {true};
    EXPECT_THROW(r.edited(), DimensionMismatch);
}

TEST(Edit, RefineHorizonBounds) {
    const DiffusionModel model = model_for(50, 20, true);
    EditRequest r;
    r.base = Vector::Zero(2);
    r.mask = {true, false};
    r.replacement = Vector::Ones(2);
    Rng rng(1);
    r.refine_horizon = 0;
    EXPECT_THROW(edit_and_refine(model, r, rng), InvalidArgument);
    r.refine_horizon = 21;
    EXPECT_THROW(edit_and_refine(model, r, rng), InvalidArgument);
    r.refine_horizon = 20;
    EXPECT_EQ(edit_and_refine(model, r, rng).size(), 2);
}

TEST(Ddim, EtaOneConsecutiveMatchesAncestralInDistribution) {
    const DiffusionModel model = model_for(100, 100, true, 1);
    const Vector x{{0.4}};
    const Step t = 40;
    Rng a(1), b(2);
    const int n = 100000;
    double sa = 0, sb = 0, qa = 0, qb = 0;
    for (int i = 0; i < n; ++i) {
        const double u = ddim_step(model, x, t, t - 1, 1.0, a)[0];
        const double v = denoise_step(model, x, t, b)[0];
        sa += u;
        sb += v;
        qa += u * u;
        qb += v * v;
    }
    const double var = model.schedule.beta_tilde(t);
    EXPECT_NEAR(sa / n, sb / n, 4 * std::sqrt(2 * var / n));
    EXPECT_NEAR(qa / n - (sa / n) * (sa / n), var, 4 * var * std::sqrt(2.0 / n));
    EXPECT_NEAR(qb / n - (sb / n) * (sb / n), var, 4 * var * std::sqrt(2.0 / n));
}

TEST(Ddim, FinalJumpReturnsCleanEstimate) {
    const DiffusionModel model = model_for(100, 100, true);
    const NoiseSchedule& s = model.schedule;
    Rng rng(3);
    const Vector x{{0.2, 0.9}};
    const Vector eps = predict_eps(model.net, x, 30);
    const Vector x0_hat = (x - std::sqrt(s.one_minus_alpha_bar(30)) * eps) / std::sqrt(s.alpha_bar(30));
    EXPECT_LT((ddim_step(model, x, 30, 0, 0.0, rng) - x0_hat).norm(), 1e-12);
}

TEST(Edit, RefineOneStaysClose) {
    const DiffusionModel model = model_for(1000, 100, true);
    const double bound = 3 * std::sqrt(model.schedule.one_minus_alpha_bar(1)) * std::sqrt(2.0);
    EditRequest r;
    r.base = Vector{{0.5, 0.5}};
    r.mask = {true, false};
    r.replacement = Vector{{-1.0, 0.0}};
    r.refine_horizon = 1;
    Rng rng(4);
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
        inside += (edit_and_refine(model, r, rng) - r.edited()).norm() <= bound ? 1 : 0;
    }
    // A zero-ish random net moves the point by O(sqrt(beta_1)) only.
    EXPECT_GE(inside, 990);
}

TEST(Edit, EmptyMaskMatchesPointMassSampler) {
    const DiffusionModel model = model_for(50, 20, true, 1);
    EditRequest r;
    r.base = Vector{{0.8}};
    r.mask = {false};
    r.replacement = Vector::Zero(1);
    r.refine_horizon = 8;
    Rng rng(5);
    const int n = 20000;
    double se = 0, qe = 0;
    for (int i = 0; i < n; ++i) {
        const double v = edit_and_refine(model, r, rng)[0];
        se += v;
        qe += v * v;
    }
    const SampleSet es = es_sample(model, point_mass(r.base), full_plan(8), n, rng);
    const double me = se / n, ve = qe / n - me * me;
    const double ms = es.mean(), vs = (es.array() - ms).square().mean();
    EXPECT_NEAR(me, ms, 4 * std::sqrt((ve + vs) / n));
    EXPECT_NEAR(ve, vs, 4 * (ve + vs) / std::sqrt(2.0 * n));
}

}  // namespace
}  // namespace esddpm
