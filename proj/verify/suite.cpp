// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "suite.hpp"

#include <cmath>
#include <sstream>

#include "esddpm/basegen.hpp"
#include "esddpm/checkpoint.hpp"
#include "esddpm/essampler.hpp"
#include "esddpm/metrics.hpp"
#include "oracles.hpp"

namespace esddpm::verify {

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

CheckResult gradient_check(Rng& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        NetworkConfig cfg;
        cfg.input_dim = 2;
        cfg.output_dim = 2;
        cfg.hidden = {6, 5};
        cfg.time_embed_dim = 4;
        cfg.horizon = 50;
        cfg.class_count = trial == 2 ? 3 : 0;
        cfg.class_embed_dim = trial == 2 ? 2 : 0;
        cfg.activation = trial == 1 ? Activation::silu : Activation::tanh;
        const Network net = random_network(cfg, rng);
        const Matrix x = Matrix::Random(2, 3);
        const std::vector<Step> steps = {1, 17, 50};
        const Labels labels = cfg.class_count ? Labels{0, 2, 1} : Labels{};
        worst = std::max(worst, network_gradient_error(net, x, steps, labels, Matrix::Random(2, 3)));
    }
    return {"gradient_check", worst < 1e-4, "max relative error " + fmt(worst)};
}

CheckResult marginal_chain(Rng& rng) {
    const NoiseSchedule s = NoiseSchedule::linear(100);
    const Vector x0 = Vector::Constant(1, 0.7);
    const int n = 20000;
    const Step t = 60;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        Vector x = x0;
        for (Step k = 1; k <= t; ++k) {
            x = forward_step(s, x, k, standard_normal(rng, 1));
        }
        sum += x[0];
        sum2 += x[0] * x[0];
    }
    const MarginalParams m = marginal(s, t);
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double mean_z = std::abs(mean - m.scale * x0[0]) / std::sqrt(m.noise_var / n);
    const double var_z = std::abs(var - m.noise_var) / (m.noise_var * std::sqrt(2.0 / (n - 1)));
    return {"marginal_matches_chain", mean_z < 4.0 && var_z < 4.0,
            "mean z " + fmt(mean_z) + ", variance z " + fmt(var_z)};
}

CheckResult posterior_quadrature(Rng& rng) {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    std::uniform_int_distribution<Step> pick(2, 1000);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Step t = pick(rng);
        const double x0 = 4.0 * uniform01(rng) - 2.0;
        const double xt = 4.0 * uniform01(rng) - 2.0;
        const GaussianPosterior p = posterior_params(s, t, Vector::Constant(1, x0), Vector::Constant(1, xt));
        const Moments q = quadrature_posterior(s, t, x0, xt);
        worst = std::max(worst, std::abs(p.mean[0] - q.mean) / std::max(std::abs(q.mean), 1e-3));
        worst = std::max(worst, std::abs(p.variance - q.variance) / q.variance);
    }
    return {"posterior_matches_quadrature", worst < 1e-6, "max relative error " + fmt(worst)};
}

void elbo_checks(Rng& rng, SuiteReport& report) {
    int violations = 0;
    for (int i = 0; i < 20; ++i) {
        const LinearGaussianInstance inst = random_linear_instance(rng);
        const ElboReport r = verify_elbo_bound(inst, 2000, rng);
        violations += r.bound_holds() ? 0 : 1;
        report.elbo.push_back(r);
    }
    report.checks.push_back({"elbo_bound_random_instances", violations == 0,
                             std::to_string(violations) + " violations in 20 instances"});
    const LinearGaussianInstance exact =
        exact_posterior_instance(NoiseSchedule::from_betas({0.5, 0.9, 0.99, 0.999}), 4, 0.3, 0.8, 0.9);
    const ElboReport r = verify_elbo_bound(exact, 20000, rng);
    report.elbo.push_back(r);
    report.checks.push_back({"elbo_tight_at_exact_posterior", std::abs(*r.gap) < 3.0 * r.mc_std_error,
                             "gap " + fmt(*r.gap) + ", 3 stderr " + fmt(3.0 * r.mc_std_error)});
}

CheckResult reconstruction_identity() {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    double worst = 0.0;
    for (Step t : {1, 10, 100, 500, 1000}) {
        const double ab = s.alpha_bar(t);
        const double c1 = reconstruction_weight(s, t);
        // KL(N(sqrt(ab) x0, (1-ab)) || N(sqrt(ab) f, (1-ab))) for unit |x0 - f|.
        const double kl = ab / (2.0 * (1.0 - ab));
        worst = std::max(worst, std::abs(c1 - kl) / kl);
    }
    return {"reconstruction_weight_identity", worst < 1e-12, "max relative error " + fmt(worst)};
}

CheckResult degenerate_plan(Rng& rng) {
    Rng init(1);
    const DiffusionModel model =
        DiffusionModel::create(NoiseSchedule::linear(20), 10, default_denoiser_config(2, 20), init);
    GmmParams g;
    g.weights = Vector::Ones(1);
    g.means = Matrix::Zero(2, 1);
    g.variances = Matrix::Ones(2, 1);
    const BaseGenerator gen = BaseGenerator::from_gmm(g);
    const std::uint64_t seed = rng();
    Rng a(seed), b(seed);
    const SampleSet es = es_sample(model, gen, full_plan(0), 16, a);
    // Same per-sample streams, first draw of each is the base sample.
    const std::uint64_t run_seed = b();
    double diff = 0.0;
    for (int i = 0; i < 16; ++i) {
        Rng s = stream_rng(run_seed, static_cast<std::uint64_t>(i));
        diff = std::max(diff, (es.col(i) - generate(gen, s)).cwiseAbs().maxCoeff());
    }
    return {"tprime_zero_returns_base", diff == 0.0, "max difference " + fmt(diff)};
}

CheckResult metric_references(Rng& rng) {
    const SampleSet a = Matrix::Random(2, 60);
    const SampleSet b = Matrix::Random(2, 50).array() + 0.3;
    double worst = std::abs(energy_distance(a, b) - energy_distance_reference(a, b));
    worst = std::max(worst, std::abs(mmd_rbf(a, b, 0.7).value - mmd_reference(a, b, 0.7, false)));
    const PrecisionRecall pr = knn_precision_recall(a, b, 5);
    const PrecisionRecall ref = knn_reference(a, b, 5);
    worst = std::max({worst, std::abs(pr.precision - ref.precision), std::abs(pr.recall - ref.recall)});
    (void)rng;
    return {"metrics_match_brute_force", worst < 1e-12, "max difference " + fmt(worst)};
}

CheckResult checkpoint_round_trip(Rng& rng) {
    Rng init(rng());
    DiffusionModel model = DiffusionModel::create(NoiseSchedule::linear(30), 30, default_denoiser_config(2, 30), init);
    model.net = random_network(model.net.config(), init);
    CheckpointBundle bundle;
    bundle.model = model;
    const std::string bytes = encode_checkpoint(bundle);
    const std::string again = encode_checkpoint(decode_checkpoint(bytes));
    return {"checkpoint_round_trip", bytes == again, std::to_string(bytes.size()) + " bytes"};
}

}  // namespace

int SuiteReport::failures() const {
    int n = 0;
    for (const auto& c : checks) {
        n += c.passed ? 0 : 1;
    }
    return n;
}

SuiteReport run_invariant_suite(std::uint64_t seed) {
    Rng rng(seed);
    SuiteReport report;
    auto guarded = [&](const char* name, auto&& fn) {
        try {
            report.checks.push_back(fn());
        } catch (const std::exception& e) {
            report.checks.push_back({name, false, std::string("error: ") + e.what()});
        }
    };
    guarded("gradient_check", [&] { return gradient_check(rng); });
    guarded("marginal_matches_chain", [&] { return marginal_chain(rng); });
    guarded("posterior_matches_quadrature", [&] { return posterior_quadrature(rng); });
    try {
        elbo_checks(rng, report);
    } catch (const std::exception& e) {
        report.checks.push_back({"elbo_bound", false, std::string("error: ") + e.what()});
    }
    guarded("reconstruction_weight_identity", [&] { return reconstruction_identity(); });
    guarded("tprime_zero_returns_base", [&] { return degenerate_plan(rng); });
    guarded("metrics_match_brute_force", [&] { return metric_references(rng); });
    guarded("checkpoint_round_trip", [&] { return checkpoint_round_trip(rng); });
    return report;
}

}  // namespace esddpm::verify
