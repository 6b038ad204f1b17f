// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/basegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "esddpm/errors.hpp"

namespace esddpm {

const char* to_string(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::gmm:
        return "gmm";
    case GeneratorKind::vae:
        return "vae";
    case GeneratorKind::oracle:
        return "oracle";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Gaussian mixture

void validate(const GmmParams& g) {
    const auto K = g.weights.size();
    ESDDPM_CHECK(K >= 1, InvalidArgument, "GMM needs at least one component");
    ESDDPM_CHECK(g.means.cols() == K && g.variances.cols() == K && g.variances.rows() == g.means.rows(),
                 InvalidArgument, "GMM parameter shapes disagree");
    ESDDPM_CHECK((g.weights.array() >= 0.0).all() && std::abs(g.weights.sum() - 1.0) <= 1e-12,
                 InvalidArgument, "GMM weights must lie on the simplex");
    ESDDPM_CHECK((g.variances.array() >= kGmmVarianceFloor).all(), InvalidArgument,
                 "GMM variances must be at least the floor");
    ESDDPM_CHECK(g.means.allFinite(), InvalidArgument, "GMM means must be finite");
}

namespace {

// log N(x; mean, diag(var)) for every (component, datum): K x N.
Matrix component_log_densities(const GmmParams& g, const SampleSet& data) {
    const Eigen::Index K = g.weights.size();
    const Eigen::Index d = data.rows();
    Matrix out(K, data.cols());
    for (Eigen::Index k = 0; k < K; ++k) {
        const Eigen::ArrayXd var = g.variances.col(k).array();
        const double log_norm = -0.5 * (d * std::log(2.0 * std::numbers::pi) + var.log().sum());
        const Eigen::ArrayXd inv = 1.0 / var;
        for (Eigen::Index n = 0; n < data.cols(); ++n) {
            const Eigen::ArrayXd diff = data.col(n).array() - g.means.col(k).array();
            out(k, n) = log_norm - 0.5 * (diff.square() * inv).sum() + std::log(g.weights[k]);
        }
    }
    return out;
}

// Column-wise log-sum-exp; also normalizes `log_joint` into responsibilities.
double normalize_responsibilities(Matrix& log_joint) {
    double total = 0.0;
    for (Eigen::Index n = 0; n < log_joint.cols(); ++n) {
        const double m = log_joint.col(n).maxCoeff();
        const double lse = m + std::log((log_joint.col(n).array() - m).exp().sum());
        total += lse;
        log_joint.col(n) = (log_joint.col(n).array() - lse).exp();
    }
    return total;
}

Vector data_variance(const SampleSet& data) {
    const Vector mean = data.rowwise().mean();
    Vector var = (data.colwise() - mean).array().square().rowwise().mean();
    return var.cwiseMax(kGmmVarianceFloor);
}

}  // namespace

double gmm_log_likelihood(const GmmParams& gmm, const SampleSet& data) {
    ESDDPM_CHECK(data.rows() == gmm.dim(), DimensionMismatch, "data dimension differs from the GMM");
    ESDDPM_CHECK(data.cols() > 0, InvalidArgument, "no data");
    Matrix lj = component_log_densities(gmm, data);
    return normalize_responsibilities(lj) / static_cast<double>(data.cols());
}

GmmFit fit_gmm(const SampleSet& data, int components, Rng& rng, int max_iters) {
    const Eigen::Index N = data.cols();
    const Eigen::Index d = data.rows();
    ESDDPM_CHECK(components >= 1, InvalidArgument, "GMM needs K >= 1");
    ESDDPM_CHECK(N >= components, InvalidArgument, "GMM needs at least K data points");
    ESDDPM_CHECK(max_iters >= 1, InvalidArgument, "max_iters must be positive");
    const Eigen::Index K = components;

    GmmFit fit;
    GmmParams& g = fit.params;
    const Vector global_var = data_variance(data);
    g.weights = Vector::Constant(K, 1.0 / static_cast<double>(K));
    g.means.resize(d, K);
    g.variances = global_var.replicate(1, K);

    // k-means++ seeding.
    std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
    g.means.col(0) = data.col(pick(rng));
    Vector best_sq = (data.colwise() - g.means.col(0)).colwise().squaredNorm().transpose();
    for (Eigen::Index k = 1; k < K; ++k) {
        const double total = best_sq.sum();
        Eigen::Index chosen = pick(rng);
        if (total > 0.0) {
            double u = uniform01(rng) * total;
            for (Eigen::Index n = 0; n < N; ++n) {
                u -= best_sq[n];
                if (u <= 0.0) {
                    chosen = n;
                    break;
                }
            }
        }
        g.means.col(k) = data.col(chosen);
        best_sq = best_sq.cwiseMin((data.colwise() - g.means.col(k)).colwise().squaredNorm().transpose());
    }

    const double degenerate_mass = 1e-10 * static_cast<double>(N);
    for (int iter = 0;; ++iter) {
        Matrix resp = component_log_densities(g, data);
        const double ll = normalize_responsibilities(resp);
        if (!std::isfinite(ll)) {
            throw NumericalError("GMM log-likelihood is not finite");
        }
        fit.log_likelihood.push_back(ll);
        const std::size_t h = fit.log_likelihood.size();
        if (h >= 2) {
            const double prev = fit.log_likelihood[h - 2];
            if (std::abs(ll - prev) < 1e-8 * std::abs(prev)) {
                break;
            }
        }
        if (iter == max_iters) {
            break;
        }

        // M-step.
        bool reseeded = false;
        const Vector mass = resp.rowwise().sum();
        for (Eigen::Index k = 0; k < K; ++k) {
            if (mass[k] < degenerate_mass) {
                g.means.col(k) = data.col(pick(rng));
                g.variances.col(k) = global_var;
                g.weights[k] = 1.0 / static_cast<double>(N);
                reseeded = true;
                continue;
            }
            const Vector mean = data * resp.row(k).transpose() / mass[k];
            const Matrix centered = data.colwise() - mean;
            Vector var = centered.array().square().matrix() * resp.row(k).transpose() / mass[k];
            g.means.col(k) = mean;
            g.variances.col(k) = var.cwiseMax(kGmmVarianceFloor);
            g.weights[k] = mass[k] / static_cast<double>(N);
        }
        g.weights /= g.weights.sum();
        fit.reseeded.push_back(reseeded);
        fit.iterations = iter + 1;
    }
    validate(g);
    return fit;
}

// ---------------------------------------------------------------------------
// VAE

double reconstruction_weight(double alpha_bar) {
    ESDDPM_CHECK(alpha_bar > 0.0 && alpha_bar < 1.0, InvalidArgument, "alpha_bar must lie in (0, 1)");
    return alpha_bar / (2.0 * (1.0 - alpha_bar));
}

double reconstruction_weight(const NoiseSchedule& schedule, Step horizon) {
    ESDDPM_CHECK(horizon >= 1, InvalidArgument, "reconstruction weight needs T' >= 1");
    return schedule.alpha_bar(horizon) / (2.0 * schedule.one_minus_alpha_bar(horizon));
}

namespace {

Labels single_label(Label c) { return c.has_value() ? Labels{*c} : Labels{}; }

void check_vae_label(const VaeParams& vae, Label c) {
    ESDDPM_CHECK(c.has_value() == vae.conditional(), InvalidArgument,
                 "label presence must match the VAE's conditioning");
}

}  // namespace

VaeEncoding vae_encode(const VaeParams& vae, const Vector& x, Label c) {
    check_vae_label(vae, c);
    const Matrix input = vae.conditional() ? Matrix(0, 1) : Matrix(x);
    const Matrix out = vae.encoder.forward(input, {}, single_label(c));
    const auto L = vae.latent_dim;
    return {out.col(0).head(L),
            out.col(0).tail(L).cwiseMax(-kVaeLogVarClamp).cwiseMin(kVaeLogVarClamp)};
}

Vector vae_decode(const VaeParams& vae, const Vector& z, Label c) {
    check_vae_label(vae, c);
    ESDDPM_CHECK(z.size() == vae.latent_dim, DimensionMismatch, "latent code has the wrong dimension");
    return vae.decoder.forward(Matrix(z), {}, single_label(c)).col(0);
}

VaeLossAndGrad vae_loss_and_grad(const VaeParams& vae, const Matrix& x, const Labels& labels, const Matrix& eps,
                                  double reconstruction_weight) {
    const int L = vae.latent_dim;
    const auto B = x.cols();
    ESDDPM_CHECK(eps.rows() == L && eps.cols() == B, DimensionMismatch, "eps must be latent_dim x batch");
    const double C1 = reconstruction_weight;
    ForwardCache enc_cache;
    const Matrix enc_in = vae.conditional() ? Matrix(0, B) : x;
    const Matrix enc_out = vae.encoder.forward(enc_in, {}, labels, &enc_cache);
    const Matrix mu = enc_out.topRows(L);
    const Matrix raw_lv = enc_out.bottomRows(L);
    const Matrix lv = raw_lv.cwiseMax(-kVaeLogVarClamp).cwiseMin(kVaeLogVarClamp);
    const Matrix sd = (0.5 * lv.array()).exp();
    const Matrix z = mu + sd.cwiseProduct(eps);

    ForwardCache dec_cache;
    const Matrix recon = vae.decoder.forward(z, {}, labels, &dec_cache);
    const Matrix residual = x - recon;
    const double kl = 0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array()).sum();
    VaeLossAndGrad out;
    out.loss = (kl + C1 * residual.squaredNorm()) / static_cast<double>(B);

    const Matrix d_recon = (-2.0 * C1 / static_cast<double>(B)) * residual;
    BackwardResult dec_back = vae.decoder.backward(dec_cache, d_recon);
    const Matrix& dz = dec_back.input_grad;

    Matrix upstream(2 * L, B);
    upstream.topRows(L) = dz + mu / static_cast<double>(B);
    Matrix d_lv = 0.5 * dz.cwiseProduct(eps).cwiseProduct(sd) +
                  0.5 * (lv.array().exp() - 1.0).matrix() / static_cast<double>(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        for (int i = 0; i < L; ++i) {
            if (raw_lv(i, j) < -kVaeLogVarClamp || raw_lv(i, j) > kVaeLogVarClamp) {
                d_lv(i, j) = 0.0;
            }
        }
    }
    upstream.bottomRows(L) = d_lv;
    BackwardResult enc_back = vae.encoder.backward(enc_cache, upstream);
    out.encoder_grads = std::move(enc_back.grads);
    out.decoder_grads = std::move(dec_back.grads);
    return out;
}

VaeFit train_vae(const SampleSet& data, const Labels& labels, const VaeConfig& config, Rng& rng) {
    const Eigen::Index N = data.cols();
    const int d = static_cast<int>(data.rows());
    const int L = config.latent_dim;
    const bool conditional = config.class_count > 0;
    ESDDPM_CHECK(N > 0, InvalidArgument, "VAE training data is empty");
    ESDDPM_CHECK(L >= 1 && config.batch_size >= 1 && config.iterations >= 0 && config.learning_rate > 0.0,
                 InvalidArgument, "invalid VAE config");
    ESDDPM_CHECK(config.reconstruction_weight > 0.0, InvalidArgument, "reconstruction weight must be positive");
    ESDDPM_CHECK(conditional == !labels.empty(), InvalidArgument,
                 "labels must be given exactly for conditional VAEs");
    ESDDPM_CHECK(labels.empty() || labels.size() == static_cast<std::size_t>(N), DimensionMismatch,
                 "labels must match the data");

    NetworkConfig enc_cfg;
    enc_cfg.input_dim = conditional ? 0 : d;
    enc_cfg.output_dim = 2 * L;
    enc_cfg.hidden = config.hidden;
    enc_cfg.time_embed_dim = 0;
    enc_cfg.class_count = config.class_count;
    enc_cfg.class_embed_dim = conditional ? config.class_embed_dim : 0;

    NetworkConfig dec_cfg = enc_cfg;
    dec_cfg.input_dim = L;
    dec_cfg.output_dim = d;

    VaeFit fit{VaeParams{Network(enc_cfg, rng), Network(dec_cfg, rng), L}, {}};
    VaeParams& vae = fit.params;
    AdamState enc_state = AdamState::for_network(vae.encoder);
    AdamState dec_state = AdamState::for_network(vae.decoder);

    const std::uint64_t seed = rng();
    const int B = config.batch_size;
    const double C1 = config.reconstruction_weight;
    Matrix x(d, B);
    Labels batch_labels;
    for (int it = 0; it < config.iterations; ++it) {
        Rng step_rng = stream_rng(seed, static_cast<std::uint64_t>(it));
        std::uniform_int_distribution<Eigen::Index> pick(0, N - 1);
        batch_labels.clear();
        for (int j = 0; j < B; ++j) {
            const Eigen::Index k = pick(step_rng);
            x.col(j) = data.col(k);
            if (conditional) {
                batch_labels.push_back(labels[static_cast<std::size_t>(k)]);
            }
        }

        Matrix eps(L, B);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int j = 0; j < B; ++j) {
            for (int i = 0; i < L; ++i) {
                eps(i, j) = normal(step_rng);
            }
        }
        const VaeLossAndGrad lg = vae_loss_and_grad(vae, x, batch_labels, eps, C1);
        if (!std::isfinite(lg.loss)) {
            throw NumericalError("VAE loss is not finite at iteration " + std::to_string(it));
        }
        fit.losses.push_back(lg.loss);

        adam_step(vae.decoder, lg.decoder_grads, dec_state, config.learning_rate);
        adam_step(vae.encoder, lg.encoder_grads, enc_state, config.learning_rate);
    }
    return fit;
}

// ---------------------------------------------------------------------------
// BaseGenerator

BaseGenerator::BaseGenerator(Impl impl, int class_count) : impl_(std::move(impl)), class_count_(class_count) {}

BaseGenerator BaseGenerator::from_gmm(GmmParams gmm) {
    validate(gmm);
    return BaseGenerator(std::vector<GmmParams>{std::move(gmm)}, 0);
}

BaseGenerator BaseGenerator::from_class_gmms(std::vector<GmmParams> per_class) {
    ESDDPM_CHECK(!per_class.empty(), InvalidArgument, "conditional GMM needs at least one class");
    for (const auto& g : per_class) {
        validate(g);
        ESDDPM_CHECK(g.dim() == per_class.front().dim(), DimensionMismatch, "class GMMs differ in dimension");
    }
    const int classes = static_cast<int>(per_class.size());
    return BaseGenerator(std::move(per_class), classes);
}

BaseGenerator BaseGenerator::from_vae(VaeParams vae) {
    const int classes = vae.encoder.config().class_count;
    ESDDPM_CHECK(vae.decoder.config().class_count == classes, InvalidArgument,
                 "VAE encoder and decoder disagree on conditioning");
    ESDDPM_CHECK(vae.decoder.config().input_dim == vae.latent_dim &&
                     vae.encoder.config().output_dim == 2 * vae.latent_dim,
                 DimensionMismatch, "VAE networks do not match the latent dimension");
    return BaseGenerator(std::move(vae), classes);
}

BaseGenerator BaseGenerator::from_oracle(OracleData oracle, int class_count) {
    ESDDPM_CHECK(oracle.data.cols() > 0, InvalidArgument, "oracle generator needs data");
    ESDDPM_CHECK(oracle.jitter >= 0.0, InvalidArgument, "oracle jitter must be nonnegative");
    ESDDPM_CHECK((class_count > 0) == !oracle.labels.empty(), InvalidArgument,
                 "oracle labels must be given exactly when conditional");
    std::vector<std::vector<Eigen::Index>> index;
    if (class_count > 0) {
        ESDDPM_CHECK(oracle.labels.size() == static_cast<std::size_t>(oracle.data.cols()), DimensionMismatch,
                     "oracle labels must match the data");
        index.resize(static_cast<std::size_t>(class_count));
        for (std::size_t n = 0; n < oracle.labels.size(); ++n) {
            const int c = oracle.labels[n];
            ESDDPM_CHECK(c >= 0 && c < class_count, IndexOutOfRange, "oracle label out of range");
            index[static_cast<std::size_t>(c)].push_back(static_cast<Eigen::Index>(n));
        }
        for (const auto& bucket : index) {
            ESDDPM_CHECK(!bucket.empty(), InvalidArgument, "oracle has a class without data");
        }
    }
    BaseGenerator g(std::move(oracle), class_count);
    g.oracle_index_ = std::move(index);
    return g;
}

GeneratorKind BaseGenerator::kind() const {
    switch (impl_.index()) {
    case 0:
        return GeneratorKind::gmm;
    case 1:
        return GeneratorKind::vae;
    default:
        return GeneratorKind::oracle;
    }
}

int BaseGenerator::data_dim() const {
    switch (kind()) {
    case GeneratorKind::gmm:
        return gmms().front().dim();
    case GeneratorKind::vae:
        return vae().data_dim();
    case GeneratorKind::oracle:
        return static_cast<int>(oracle().data.rows());
    }
    return 0;
}

Vector BaseGenerator::sample(Rng& rng, Label c) const {
    if (conditional()) {
        ESDDPM_CHECK(c.has_value(), InvalidArgument, "conditional generator needs a label");
        ESDDPM_CHECK(*c >= 0 && *c < class_count_, IndexOutOfRange,
                     "class label " + std::to_string(*c) + " out of range");
    } else {
        ESDDPM_CHECK(!c.has_value(), InvalidArgument, "unconditional generator given a label");
    }

    switch (kind()) {
    case GeneratorKind::gmm: {
        const GmmParams& g = gmms()[conditional() ? static_cast<std::size_t>(*c) : 0];
        std::discrete_distribution<int> pick(g.weights.data(), g.weights.data() + g.weights.size());
        const int k = pick(rng);
        const Vector z = standard_normal(rng, g.dim());
        return g.means.col(k) + g.variances.col(k).cwiseSqrt().cwiseProduct(z);
    }
    case GeneratorKind::vae: {
        const VaeParams& v = vae();
        Vector z = standard_normal(rng, v.latent_dim);
        if (v.conditional()) {
            const VaeEncoding enc = vae_encode(v, Vector(), c);
            z = enc.mean + (0.5 * enc.log_var.array()).exp().matrix().cwiseProduct(z);
        }
        return vae_decode(v, z, c);
    }
    case GeneratorKind::oracle: {
        const OracleData& o = oracle();
        Eigen::Index idx = 0;
        if (conditional()) {
            const auto& bucket = oracle_index_[static_cast<std::size_t>(*c)];
            std::uniform_int_distribution<std::size_t> pick(0, bucket.size() - 1);
            idx = bucket[pick(rng)];
        } else {
            std::uniform_int_distribution<Eigen::Index> pick(0, o.data.cols() - 1);
            idx = pick(rng);
        }
        return o.data.col(idx) + o.jitter * standard_normal(rng, o.data.rows());
    }
    }
    throw InvalidArgument("unknown generator kind");
}

Vector generate(const BaseGenerator& gen, Rng& rng, Label c) { return gen.sample(rng, c); }

}  // namespace esddpm
