// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "esddpm/nn.hpp"
#include "esddpm/rng.hpp"
#include "esddpm/schedule.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

enum class GeneratorKind : std::uint8_t { gmm = 0, vae = 1, oracle = 2 };

const char* to_string(GeneratorKind kind);

inline constexpr double kGmmVarianceFloor = 1e-6;

/// Diagonal-covariance Gaussian mixture.
struct GmmParams {
    Vector weights;    // K, on the simplex
    Matrix means;      // d x K
    Matrix variances;  // d x K, >= kGmmVarianceFloor

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return static_cast<int>(means.rows()); }
};

/// Throws InvalidArgument unless shapes agree, weights sum to 1 within 1e-12
/// and every variance is at least the floor.
void validate(const GmmParams& gmm);

/// Average log-density of the data under the mixture.
double gmm_log_likelihood(const GmmParams& gmm, const SampleSet& data);

struct GmmFit {
    GmmParams params;
    /// Total data log-likelihood before each M-step; entry i is evaluated at
    /// the parameters produced by i M-steps.
    std::vector<double> log_likelihood;
    /// reseeded[i] is true when M-step i re-seeded a collapsed component.
    std::vector<bool> reseeded;
    int iterations = 0;
};

/// EM for a diagonal GMM with k-means++ initialization. Components whose
/// responsibility mass collapses are re-seeded from a random datum.
GmmFit fit_gmm(const SampleSet& data, int components, Rng& rng, int max_iters = 200);

/// Encoder q(z | x) (or q(z | c) when conditional) and decoder f(z [, c]).
struct VaeParams {
    Network encoder;  // outputs [mean; log-variance], 2 * latent_dim rows
    Network decoder;
    int latent_dim = 2;

    bool conditional() const { return encoder.config().class_count > 0; }
    int data_dim() const { return decoder.config().output_dim; }
};

inline constexpr double kVaeLogVarClamp = 10.0;

struct VaeConfig {
    int latent_dim = 2;
    std::vector<int> hidden = {64, 64};
    int iterations = 3000;
    int batch_size = 128;
    double learning_rate = 1e-3;
    /// Weight C1 of the squared reconstruction error.
    double reconstruction_weight = 1.0;
    int class_count = 0;
    int class_embed_dim = 8;
};

/// C1 = alpha_bar / (2 (1 - alpha_bar)): the KL between q(x^T'|x^0) and the
/// decoder-diffused prior is C1 ||x^0 - f(z)||^2 (with C2 = 0).
double reconstruction_weight(double alpha_bar);
double reconstruction_weight(const NoiseSchedule& schedule, Step horizon);

struct VaeEncoding {
    Vector mean;
    Vector log_var;  // clamped to [-10, 10]
};

/// q(z | x) for unconditional encoders, q(z | c) for conditional ones (x ignored).
VaeEncoding vae_encode(const VaeParams& vae, const Vector& x, Label c = std::nullopt);
Vector vae_decode(const VaeParams& vae, const Vector& z, Label c = std::nullopt);

struct VaeFit {
    VaeParams params;
    std::vector<double> losses;
};

struct VaeLossAndGrad {
    double loss = 0.0;
    GradientBuffer encoder_grads;
    GradientBuffer decoder_grads;
};

/// Batch-mean of KL(q(z|.) || N(0, I)) + C1 ||x - f(z)||^2 with z = mu + sd * eps,
/// and its exact gradient for fixed eps.
VaeLossAndGrad vae_loss_and_grad(const VaeParams& vae, const Matrix& x, const Labels& labels, const Matrix& eps,
                                 double reconstruction_weight);

/// Minimizes KL(q(z|.) || N(0, I)) + C1 ||x - f(z)||^2 with reparameterized z.
/// `labels` must be given exactly when config.class_count > 0.
VaeFit train_vae(const SampleSet& data, const Labels& labels, const VaeConfig& config, Rng& rng);

/// Jittered resampler over held training data.
struct OracleData {
    SampleSet data;
    Labels labels;          // empty when unconditional
    double jitter = 1e-3;
    std::string source;     // dataset path recorded in checkpoints
};

/// Pluggable base generator f(z) supplying clean proposals.
class BaseGenerator {
public:
    static BaseGenerator from_gmm(GmmParams gmm);
    /// One mixture per class; the generator is conditional.
    static BaseGenerator from_class_gmms(std::vector<GmmParams> per_class);
    static BaseGenerator from_vae(VaeParams vae);
    static BaseGenerator from_oracle(OracleData oracle, int class_count = 0);

    GeneratorKind kind() const;
    bool conditional() const { return class_count_ > 0; }
    int class_count() const { return class_count_; }
    int data_dim() const;

    const std::vector<GmmParams>& gmms() const { return std::get<std::vector<GmmParams>>(impl_); }
    const VaeParams& vae() const { return std::get<VaeParams>(impl_); }
    const OracleData& oracle() const { return std::get<OracleData>(impl_); }

    Vector sample(Rng& rng, Label c) const;

private:
    using Impl = std::variant<std::vector<GmmParams>, VaeParams, OracleData>;
    BaseGenerator(Impl impl, int class_count);

    Impl impl_;
    int class_count_ = 0;
    std::vector<std::vector<Eigen::Index>> oracle_index_;  // per-class row indices
};

/// One clean proposal. Conditional generators require a label, unconditional
/// ones reject it.
Vector generate(const BaseGenerator& gen, Rng& rng, Label c = std::nullopt);

}  // namespace esddpm
