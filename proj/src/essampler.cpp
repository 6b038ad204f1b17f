// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/essampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

void SamplerPlan::validate() const {
    ESDDPM_CHECK(horizon >= 0, InvalidArgument, "plan horizon must be nonnegative");
    ESDDPM_CHECK(eta >= 0.0 && eta <= 1.0, InvalidArgument, "eta must lie in [0, 1]");
    if (horizon == 0) {
        ESDDPM_CHECK(sequence.empty(), InvalidArgument, "a T'=0 plan has no steps");
        return;
    }
    ESDDPM_CHECK(!sequence.empty() && sequence.front() == horizon && sequence.back() == 1, InvalidArgument,
                 "plan must start at T' and end at 1");
    for (std::size_t i = 1; i < sequence.size(); ++i) {
        ESDDPM_CHECK(sequence[i] < sequence[i - 1], InvalidArgument, "plan must be strictly decreasing");
    }
}

SamplerPlan full_plan(Step horizon, SamplerMode mode, double eta) {
    ESDDPM_CHECK(horizon >= 0, InvalidArgument, "plan horizon must be nonnegative");
    SamplerPlan plan{horizon, {}, mode, eta};
    for (Step t = horizon; t >= 1; --t) {
        plan.sequence.push_back(t);
    }
    plan.validate();
    return plan;
}

SamplerPlan uniform_plan(Step horizon, int n_steps, SamplerMode mode, double eta) {
    ESDDPM_CHECK(horizon >= 1, InvalidArgument, "uniform plan needs T' >= 1");
    ESDDPM_CHECK(n_steps >= 1 && n_steps <= horizon, InvalidArgument,
                 "uniform plan needs 1 <= n_steps <= T'");
    ESDDPM_CHECK(n_steps >= 2 || horizon == 1, InvalidArgument,
                 "a plan from T' > 1 down to 1 needs at least two steps");
    SamplerPlan plan{horizon, {}, mode, eta};
    if (n_steps == 1) {
        plan.sequence = {1};
    } else {
        const double spacing = static_cast<double>(horizon - 1) / (n_steps - 1);
        for (int k = n_steps - 1; k >= 0; --k) {
            const Step t = static_cast<Step>(std::lround(1.0 + spacing * k));
            if (plan.sequence.empty() || t < plan.sequence.back()) {
                plan.sequence.push_back(t);
            }
        }
    }
    plan.validate();
    return plan;
}

Matrix ddim_transition(const DiffusionModel& model, const Matrix& xt, Step t, Step t_next, double eta,
                       const Matrix& eps_hat, const Matrix& noise) {
    ESDDPM_CHECK(t <= model.trained_horizon && t >= 1, UntrainedStep,
                 "DDIM step " + std::to_string(t) + " outside the trained range");
    ESDDPM_CHECK(t_next >= 0 && t_next < t, InvalidArgument, "DDIM needs 0 <= t_next < t");
    ESDDPM_CHECK(eta >= 0.0 && eta <= 1.0, InvalidArgument, "eta must lie in [0, 1]");
    const NoiseSchedule& s = model.schedule;
    const double ab_t = s.alpha_bar(t);
    const double ab_next = s.alpha_bar(t_next);
    const double one_minus_t = s.one_minus_alpha_bar(t);
    const double one_minus_next = s.one_minus_alpha_bar(t_next);

    const Matrix x0_hat = (xt - std::sqrt(one_minus_t) * eps_hat) / std::sqrt(ab_t);
    const double sigma = eta * std::sqrt(one_minus_next / one_minus_t) * std::sqrt(1.0 - ab_t / ab_next);
    const double dir_var = one_minus_next - sigma * sigma;
    if (dir_var < 0.0) {
        // Only reachable through rounding when eta == 1 and the jump is tiny.
        ESDDPM_CHECK(dir_var > -1e-12, NumericalError, "DDIM direction variance is negative");
    }
    Matrix out = std::sqrt(ab_next) * x0_hat + std::sqrt(std::max(dir_var, 0.0)) * eps_hat;
    if (sigma > 0.0) {
        ESDDPM_CHECK(noise.rows() == xt.rows() && noise.cols() == xt.cols(), DimensionMismatch,
                     "noise shape differs from x^t");
        out += sigma * noise;
    }
    return out;
}

Vector ddim_step(const DiffusionModel& model, const Vector& xt, Step t, Step t_next, double eta, Rng& rng,
                 Label c) {
    const Vector eps_hat = predict_eps(model.net, xt, t, c);
    const Matrix noise = eta > 0.0 ? Matrix(standard_normal(rng, xt.size())) : Matrix();
    return ddim_transition(model, Matrix(xt), t, t_next, eta, Matrix(eps_hat), noise).col(0);
}

Matrix run_plan(const DiffusionModel& model, const SamplerPlan& plan, Matrix x, std::span<Rng> rngs,
                const Labels& labels, EvalCounter* counter) {
    plan.validate();
    ESDDPM_CHECK(plan.horizon <= model.trained_horizon, UntrainedStep,
                 "plan horizon exceeds the model's trained horizon");
    ESDDPM_CHECK(rngs.size() == static_cast<std::size_t>(x.cols()), DimensionMismatch,
                 "need one random stream per chain");
    const int d = static_cast<int>(x.rows());
    for (std::size_t i = 0; i < plan.sequence.size(); ++i) {
        const Step t = plan.sequence[i];
        const Step t_next = i + 1 < plan.sequence.size() ? plan.sequence[i + 1] : 0;
        const Matrix eps_hat = predict_eps_batch(model, x, t, labels, counter);
        if (plan.mode == SamplerMode::ancestral) {
            const Matrix noise = t_next > 0 ? draw_noise(rngs, d) : Matrix();
            x = ancestral_transition(model, x, t, t_next, eps_hat, noise);
        } else {
            const Matrix noise = plan.eta > 0.0 ? draw_noise(rngs, d) : Matrix();
            x = ddim_transition(model, x, t, t_next, plan.eta, eps_hat, noise);
        }
    }
    return x;
}

namespace {

SampleSet es_sample_impl(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan,
                         int n, const Labels* per_sample, Label c, Rng& rng, const SamplingOptions& options) {
    const int d = model.data_dim();
    const std::uint64_t seed = rng();
    SampleSet out(d, n);
    const Step horizon = plan.horizon;
    for_each_chunk(n, options.chunk_size, options.workers, [&](std::int64_t begin, std::int64_t end) {
        const auto count = static_cast<Eigen::Index>(end - begin);
        std::vector<Rng> rngs;
        rngs.reserve(static_cast<std::size_t>(count));
        Labels labels;
        Matrix x(d, count);
        Matrix eps(d, count);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index j = 0; j < count; ++j) {
            const auto i = static_cast<std::size_t>(begin + j);
            rngs.push_back(stream_rng(seed, i));
            Label label = c;
            if (per_sample != nullptr) {
                label = (*per_sample)[i];
            }
            if (label.has_value()) {
                labels.push_back(*label);
            }
            x.col(j) = gen.sample(rngs.back(), label);
            for (int r = 0; r < d; ++r) {
                eps(r, j) = normal(rngs.back());
            }
        }
        if (horizon > 0) {
            x = diffuse_to(model.schedule, x, horizon, eps);
            x = run_plan(model, plan, std::move(x), rngs, model.conditional() ? labels : Labels{},
                         options.counter);
        }
        out.middleCols(static_cast<Eigen::Index>(begin), count) = x;
    });
    return out;
}

}  // namespace

SampleSet es_sample(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan, int n,
                    Rng& rng, Label c, const SamplingOptions& options) {
    model.validate();
    plan.validate();
    ESDDPM_CHECK(n >= 0, InvalidArgument, "sample count must be nonnegative");
    ESDDPM_CHECK(plan.horizon <= model.trained_horizon, InvalidArgument,
                 "plan horizon " + std::to_string(plan.horizon) + " exceeds trained horizon " +
                     std::to_string(model.trained_horizon));
    ESDDPM_CHECK(gen.data_dim() == model.data_dim(), DimensionMismatch,
                 "generator and model differ in data dimension");
    ESDDPM_CHECK(gen.conditional() == c.has_value() && (plan.horizon == 0 || model.conditional() == c.has_value()),
                 InvalidArgument, "conditioning must agree across model, generator and call");
    return es_sample_impl(model, gen, plan, n, nullptr, c, rng, options);
}

SampleSet es_sample(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan,
                    const Labels& labels, Rng& rng, const SamplingOptions& options) {
    model.validate();
    plan.validate();
    ESDDPM_CHECK(plan.horizon <= model.trained_horizon, InvalidArgument,
                 "plan horizon " + std::to_string(plan.horizon) + " exceeds trained horizon " +
                     std::to_string(model.trained_horizon));
    ESDDPM_CHECK(gen.data_dim() == model.data_dim(), DimensionMismatch,
                 "generator and model differ in data dimension");
    const bool conditional = !labels.empty();
    ESDDPM_CHECK(gen.conditional() == conditional && (plan.horizon == 0 || model.conditional() == conditional),
                 InvalidArgument, "conditioning must agree across model, generator and call");

    const int n = static_cast<int>(labels.size());
    return es_sample_impl(model, gen, plan, n, &labels, std::nullopt, rng, options);
}

Vector EditRequest::edited() const {
    ESDDPM_CHECK(mask.size() == static_cast<std::size_t>(base.size()) && replacement.size() == base.size(),
                 DimensionMismatch, "edit mask and replacement must match the base sample");
    Vector out = base;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            out[i] = replacement[i];
        }
    }
    return out;
}

Vector edit_and_refine(const DiffusionModel& model, const EditRequest& request, Rng& rng, Label c) {
    ESDDPM_CHECK(request.base.size() == model.data_dim(), DimensionMismatch,
                 "edit base sample has the wrong dimension");
    ESDDPM_CHECK(request.refine_horizon >= 1 && request.refine_horizon <= model.trained_horizon, InvalidArgument,
                 "refine horizon must satisfy 1 <= h <= T'");
    ESDDPM_CHECK(c.has_value() == model.conditional(), InvalidArgument,
                 "label presence must match the model's conditioning");
    const Vector edited = request.edited();
    const Vector eps = standard_normal(rng, edited.size());
    Matrix x = diffuse_to(model.schedule, edited, request.refine_horizon, eps);
    const SamplerPlan plan = full_plan(request.refine_horizon);
    std::vector<Rng> rngs{Rng(rng())};
    const Labels labels = c.has_value() ? Labels{*c} : Labels{};
    return run_plan(model, plan, std::move(x), rngs, labels).col(0);
}

}  // namespace esddpm
