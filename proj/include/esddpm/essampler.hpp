// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "esddpm/basegen.hpp"
#include "esddpm/diffusion.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

enum class SamplerMode : std::uint8_t { ancestral = 0, ddim = 1 };

/// Which steps an early-stopped sampler visits after injecting the base
/// sample at step `horizon`. The sequence starts at horizon and ends at 1;
/// horizon == 0 with an empty sequence returns the base sample unchanged.
struct SamplerPlan {
    Step horizon = 0;
    std::vector<Step> sequence;
    SamplerMode mode = SamplerMode::ancestral;
    double eta = 0.0;  // DDIM stochasticity; 0 is deterministic

    /// Throws InvalidArgument if the invariants do not hold.
    void validate() const;
};

/// Every step horizon, horizon-1, .., 1.
SamplerPlan full_plan(Step horizon, SamplerMode mode = SamplerMode::ancestral, double eta = 0.0);

/// `n_steps` evenly spaced indices over 1..horizon, always including both
/// ends. n_steps == 1 is only valid when horizon == 1.
SamplerPlan uniform_plan(Step horizon, int n_steps, SamplerMode mode = SamplerMode::ancestral, double eta = 0.0);

/// Deterministic-to-stochastic jump t -> t_next (t_next == 0 gives the final
/// output). Column j of `noise` is used only when eta > 0.
Matrix ddim_transition(const DiffusionModel& model, const Matrix& xt, Step t, Step t_next, double eta,
                       const Matrix& eps_hat, const Matrix& noise);

/// Single-vector DDIM step.
Vector ddim_step(const DiffusionModel& model, const Vector& xt, Step t, Step t_next, double eta, Rng& rng,
                 Label c = std::nullopt);

/// Walks `plan` from x^{plan.horizon} down to x^0 for a batch of chains.
/// Chain j draws its noise from rngs[j]. Exactly plan.sequence.size()
/// denoiser evaluations per chain.
Matrix run_plan(const DiffusionModel& model, const SamplerPlan& plan, Matrix x, std::span<Rng> rngs,
                const Labels& labels, EvalCounter* counter = nullptr);

/// Early-stopped sampling: base sample, diffuse to T' in one shot, then
/// denoise along the plan. Sample i uses its own stream derived from one
/// draw of `rng`, so results do not depend on chunking or worker count.
SampleSet es_sample(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan, int n,
                    Rng& rng, Label c = std::nullopt, const SamplingOptions& options = {});

/// Per-sample labels variant (labels.size() == n).
SampleSet es_sample(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan,
                    const Labels& labels, Rng& rng, const SamplingOptions& options = {});

/// A coordinate-wise edit to a base sample, refined by partial denoising.
struct EditRequest {
    Vector base;
    std::vector<bool> mask;  // true = replaced coordinate
    Vector replacement;      // values used where mask is true
    Step refine_horizon = 1;

    Vector edited() const;
};

/// Applies the edit, diffuses to the refine horizon and denoises with the
/// full ancestral plan.
Vector edit_and_refine(const DiffusionModel& model, const EditRequest& request, Rng& rng,
                       Label c = std::nullopt);

}  // namespace esddpm
