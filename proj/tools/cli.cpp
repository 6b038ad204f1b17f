// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "esddpm/checkpoint.hpp"
#include "esddpm/config.hpp"
#include "esddpm/csv.hpp"
#include "esddpm/errors.hpp"
#include "esddpm/metrics.hpp"
#include "esddpm/plot.hpp"
#include "suite.hpp"

namespace fs = std::filesystem;

namespace esddpm::cli {
namespace {

// Stream ids under the run seed, one per command role.
enum : std::uint64_t { kFitStream = 1, kInitStream = 2, kSampleStream = 3, kMetricStream = 4, kEditStream = 5 };

struct Context {
    std::ostream& out;
    std::ostream& err;
    std::string config_path;
    std::optional<std::uint64_t> seed;

    void log(const std::string& line) const { err << "[esddpm] " << line << '\n'; }
};

RunConfig load_config(const Context& ctx) {
    RunConfig cfg = ctx.config_path.empty() ? run_config_from({}) : load_run_config(ctx.config_path);
    if (ctx.seed) {
        cfg.seed = *ctx.seed;
        cfg.train.seed = *ctx.seed;
    }
    return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
    const fs::path dir = resolve_output_dir(cfg);
    fs::create_directories(dir);
    return dir;
}

std::string or_default(const std::string& path, const RunConfig& cfg, const char* name) {
    return path.empty() ? (output_dir(cfg) / name).string() : path;
}

int class_count(const RunConfig& cfg) { return cfg.model.conditional ? cfg.dataset.modes : 0; }

NetworkConfig denoiser_config(const RunConfig& cfg, int dim, int classes) {
    NetworkConfig net = default_denoiser_config(dim, cfg.schedule.horizon, classes);
    net.hidden = cfg.model.hidden;
    net.time_embed_dim = cfg.model.time_embed_dim;
    net.activation = cfg.model.activation;
    return net;
}

/// Held-out reference drawn from the configured dataset with a shifted seed.
Dataset held_out(const RunConfig& cfg, int n) {
    DatasetSpec spec = cfg.dataset;
    spec.seed = cfg.dataset.seed + 1;
    spec.size = std::max(n, 2);
    return make_dataset(spec);
}

/// Labels 0, 1, .., K-1, 0, .. for conditional runs; empty otherwise.
Labels balanced_labels(int n, int classes) {
    Labels labels;
    if (classes > 0) {
        for (int i = 0; i < n; ++i) {
            labels.push_back(i % classes);
        }
    }
    return labels;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

DiffusionModel load_model(const std::string& path) {
    CheckpointBundle b = load_checkpoint(path);
    ESDDPM_CHECK(b.model.has_value(), Error, "checkpoint '" + path + "' has no network section");
    return std::move(*b.model);
}

BaseGenerator load_generator(const std::string& path) {
    CheckpointBundle b = load_checkpoint(path);
    ESDDPM_CHECK(b.generator.has_value(), Error, "checkpoint '" + path + "' has no generator section");
    return std::move(*b.generator);
}

SampleSet draw_samples(const DiffusionModel& model, const BaseGenerator& gen, const SamplerPlan& plan, int n,
                       std::optional<int> label, Rng& rng, const SamplingOptions& options, Labels& labels_out) {
    if (!gen.conditional()) {
        labels_out.clear();
        return es_sample(model, gen, plan, n, rng, std::nullopt, options);
    }
    if (label) {
        labels_out.assign(static_cast<std::size_t>(n), *label);
        return es_sample(model, gen, plan, n, rng, label, options);
    }
    labels_out = balanced_labels(n, gen.class_count());
    return es_sample(model, gen, plan, labels_out, rng, options);
}

// ---------------------------------------------------------------------------
// Metric columns

std::vector<std::string> metric_header(const std::vector<std::string>& names) {
    std::vector<std::string> cols;
    for (const auto& name : names) {
        if (name == "energy") cols.insert(cols.end(), {"energy_distance"});
        if (name == "mmd") cols.insert(cols.end(), {"mmd_rbf", "mmd_bandwidth"});
        if (name == "sw") cols.insert(cols.end(), {"sliced_wasserstein", "sw_projections"});
        if (name == "prd") cols.insert(cols.end(), {"knn_precision", "knn_recall"});
        if (name == "perm") cols.insert(cols.end(), {"permutation_p"});
    }
    return cols;
}

std::vector<std::string> metric_values(const RunConfig& cfg, const SampleSet& gen, const SampleSet& ref, Rng& rng) {
    const auto& m = cfg.metrics;
    std::vector<std::string> vals;
    for (const auto& name : m.names) {
        if (name == "energy") {
            vals.push_back(format_real(energy_distance(gen, ref, cfg.sampler.workers)));
        } else if (name == "mmd") {
            const MmdResult r = mmd_rbf(gen, ref);
            vals.push_back(format_real(r.value));
            vals.push_back(format_real(r.bandwidth));
        } else if (name == "sw") {
            const SlicedWasserstein r = sliced_wasserstein(gen, ref, m.projections, rng);
            vals.push_back(format_real(r.value));
            vals.push_back(std::to_string(r.projections));
        } else if (name == "prd") {
            const PrecisionRecall r = knn_precision_recall(gen, ref, m.knn_k);
            vals.push_back(format_real(r.precision));
            vals.push_back(format_real(r.recall));
        } else if (name == "perm") {
            vals.push_back(format_real(permutation_test(gen, ref, m.permutations, rng)));
        }
    }
    return vals;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// ---------------------------------------------------------------------------
// Commands

struct FitBaseArgs {
    std::string base;
};

int fit_base(const Context& ctx, const FitBaseArgs& args) {
    const RunConfig cfg = load_config(ctx);
    const std::string path = or_default(args.base, cfg, "base.ckpt");
    const Dataset data = make_dataset(cfg.dataset);
    const int classes = class_count(cfg);
    Rng rng = stream_rng(cfg.seed, kFitStream);
    const auto start = std::chrono::steady_clock::now();
    std::optional<BaseGenerator> gen;
    std::string loglik;
    switch (cfg.generator.kind) {
        case GeneratorKind::gmm: {
            if (classes == 0) {
                const GmmFit fit = fit_gmm(data.data, cfg.generator.components, rng);
                loglik = format_real(gmm_log_likelihood(fit.params, data.data));
                gen = BaseGenerator::from_gmm(fit.params);
            } else {
                std::vector<GmmParams> per_class;
                for (int c = 0; c < classes; ++c) {
                    std::vector<Eigen::Index> idx;
                    for (std::size_t i = 0; i < data.labels.size(); ++i) {
                        if (data.labels[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
                    }
                    ESDDPM_CHECK(idx.size() >= static_cast<std::size_t>(cfg.generator.components), ConfigError,
                                 "generator.components: class " + std::to_string(c) + " has too few points");
                    per_class.push_back(fit_gmm(data.data(Eigen::all, idx), cfg.generator.components, rng).params);
                }
                gen = BaseGenerator::from_class_gmms(std::move(per_class));
            }
            break;
        }
        case GeneratorKind::vae: {
            VaeConfig vc;
            vc.latent_dim = cfg.generator.vae_latent;
            vc.iterations = cfg.generator.vae_iterations;
            vc.reconstruction_weight = reconstruction_weight(schedule_for(cfg), cfg.model.tprime);
            vc.class_count = classes;
            const VaeFit fit = train_vae(data.data, classes > 0 ? data.labels : Labels{}, vc, rng);
            loglik.clear();
            ctx.log("vae final loss " + format_real(fit.losses.back()));
            gen = BaseGenerator::from_vae(fit.params);
            break;
        }
        case GeneratorKind::oracle: {
            const std::string source = (fs::path(path).parent_path() / "oracle-data.csv").string();
            write_samples_csv(source, data.data, classes > 0 ? data.labels : Labels{});
            gen = BaseGenerator::from_oracle(
                OracleData{data.data, classes > 0 ? data.labels : Labels{}, cfg.generator.oracle_jitter, source},
                classes);
            break;
        }
    }
    const double secs = seconds_since(start);
    CheckpointBundle bundle;
    bundle.generator = *gen;
    save_checkpoint(path, bundle);
    ctx.log("fitted " + std::string(to_string(gen->kind())) + " base on " + std::to_string(data.data.cols()) +
            " points in " + format_real(secs) + " s; saved " + path);
    CsvWriter csv(ctx.out);
    csv.row({"generator", "dataset", "classes", "fit_seconds", "train_loglik", "checkpoint"});
    csv.row({to_string(gen->kind()), to_string(cfg.dataset.kind), std::to_string(classes), format_real(secs), loglik,
             path});
    return kExitOk;
}

struct TrainArgs {
    std::string model;
    bool resume = false;
    std::optional<int> iterations;
    int log_every = 100;
};

int train_diffusion(const Context& ctx, const TrainArgs& args) {
    RunConfig cfg = load_config(ctx);
    if (args.iterations) {
        ESDDPM_CHECK(*args.iterations >= 0, ConfigError, "train.iterations: must be >= 0");
        cfg.train.iterations = *args.iterations;
    }
    ESDDPM_CHECK(args.log_every >= 1, ConfigError, "--log-every: must be positive");
    const std::string path = or_default(args.model, cfg, "model.ckpt");
    const Dataset data = make_dataset(cfg.dataset);
    const int classes = class_count(cfg);

    DiffusionModel model;
    std::optional<Trainer> trainer;
    if (args.resume && fs::exists(path)) {
        CheckpointBundle b = load_checkpoint(path);
        ESDDPM_CHECK(b.model && b.optimizer, Error, "checkpoint '" + path + "' cannot be resumed");
        model = std::move(*b.model);
        ESDDPM_CHECK(model.trained_horizon == cfg.model.tprime, ConfigError,
                     "model.tprime: checkpoint was trained with T'=" + std::to_string(model.trained_horizon));
        trainer.emplace(model, cfg.train, b.optimizer->adam, b.optimizer->iteration);
        ctx.log("resuming at iteration " + std::to_string(b.optimizer->iteration));
    } else {
        Rng init = stream_rng(cfg.seed, kInitStream);
        model = DiffusionModel::create(schedule_for(cfg), cfg.model.tprime,
                                       denoiser_config(cfg, static_cast<int>(data.data.rows()), classes), init,
                                       cfg.model.sigma);
        trainer.emplace(model, cfg.train);
    }
    const Labels labels = classes > 0 ? data.labels : Labels{};
    CsvWriter csv(ctx.out);
    csv.row({"iteration", "mean_loss", "learning_rate"});
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t target = static_cast<std::uint64_t>(cfg.train.iterations);
    while (trainer->iteration() < target) {
        const auto block = static_cast<int>(std::min<std::uint64_t>(args.log_every, target - trainer->iteration()));
        const double loss = trainer->run(data.data, labels, block);
        csv.row({std::to_string(trainer->iteration()), format_real(loss),
                 format_real(trainer->learning_rate_at(trainer->iteration() - 1))});
    }
    CheckpointBundle bundle;
    bundle.schedule = model.schedule;
    bundle.model = model;
    bundle.optimizer = OptimizerCheckpoint{trainer->optimizer(), trainer->iteration()};
    save_checkpoint(path, bundle);
    ctx.log("trained to iteration " + std::to_string(trainer->iteration()) + " in " +
            format_real(seconds_since(start)) + " s; saved " + path);
    return kExitOk;
}

struct SampleArgs {
    std::string model;
    std::string base;
    std::optional<int> tprime;
    std::optional<int> plan_steps;
    std::string mode;
    std::optional<double> eta;
    std::optional<int> n;
    std::optional<int> label;
    std::optional<int> workers;
    std::string plot;
};

void apply_sampler_overrides(RunConfig& cfg, const SampleArgs& a) {
    if (a.plan_steps) cfg.sampler.steps = *a.plan_steps;
    if (!a.mode.empty()) cfg.sampler.mode = a.mode == "ddim" ? SamplerMode::ddim : SamplerMode::ancestral;
    if (a.eta) cfg.sampler.eta = *a.eta;
    if (a.n) cfg.sampler.samples = *a.n;
    if (a.workers) cfg.sampler.workers = *a.workers;
}

void check_plan_args(const RunConfig& cfg, Step tprime, const DiffusionModel& model) {
    ESDDPM_CHECK(tprime >= 0 && tprime <= model.trained_horizon, ConfigError,
                 "--tprime: " + std::to_string(tprime) + " outside [0, " + std::to_string(model.trained_horizon) +
                     "]");
    ESDDPM_CHECK(cfg.sampler.steps >= 0, ConfigError, "--plan-steps: must be >= 0");
    ESDDPM_CHECK(cfg.sampler.steps != 1 || tprime <= 1, ConfigError,
                 "--plan-steps: a single step cannot span T' > 1");
    ESDDPM_CHECK(cfg.sampler.eta >= 0.0 && cfg.sampler.eta <= 1.0, ConfigError, "--eta: must lie in [0, 1]");
    ESDDPM_CHECK(cfg.sampler.samples >= 0, ConfigError, "--n: must be >= 0");
    ESDDPM_CHECK(cfg.sampler.workers >= 1, ConfigError, "--workers: must be positive");
}

int sample(const Context& ctx, const SampleArgs& args) {
    RunConfig cfg = load_config(ctx);
    apply_sampler_overrides(cfg, args);
    const DiffusionModel model = load_model(or_default(args.model, cfg, "model.ckpt"));
    const BaseGenerator gen = load_generator(or_default(args.base, cfg, "base.ckpt"));
    const Step tprime = args.tprime.value_or(model.trained_horizon);
    check_plan_args(cfg, tprime, model);
    const SamplerPlan plan = plan_for(cfg, tprime);
    EvalCounter counter;
    SamplingOptions options;
    options.workers = cfg.sampler.workers;
    options.counter = &counter;
    Rng rng = stream_rng(cfg.seed, kSampleStream);
    Labels labels;
    const int n = cfg.sampler.samples;
    const auto start = std::chrono::steady_clock::now();
    const SampleSet x = draw_samples(model, gen, plan, n, args.label, rng, options, labels);
    const double per_sample = n > 0 ? static_cast<double>(counter.value()) / n : 0.0;
    ctx.log("sampled " + std::to_string(n) + " points at T'=" + std::to_string(tprime) + " with a " +
            std::to_string(plan.sequence.size()) + "-step plan in " + format_real(seconds_since(start)) + " s");
    ctx.log("network evaluations per sample: " + format_real(per_sample));
    write_samples_csv(ctx.out, x, labels);
    if (!args.plot.empty()) {
        emit_plot({x}, args.plot);
    }
    return kExitOk;
}

struct SweepArgs {
    SampleArgs sampling;
    std::vector<int> tprimes;
};

int sweep(const Context& ctx, const SweepArgs& args) {
    RunConfig cfg = load_config(ctx);
    apply_sampler_overrides(cfg, args.sampling);
    if (!args.tprimes.empty()) {
        cfg.sweep_tprimes = args.tprimes;
    }
    const DiffusionModel model = load_model(or_default(args.sampling.model, cfg, "model.ckpt"));
    const BaseGenerator gen = load_generator(or_default(args.sampling.base, cfg, "base.ckpt"));
    for (Step t : cfg.sweep_tprimes) {
        check_plan_args(cfg, t, model);
    }
    const int n = cfg.sampler.samples;
    ESDDPM_CHECK(n > cfg.metrics.knn_k, ConfigError, "--n: must exceed metrics.knn_k");
    const Dataset ref = held_out(cfg, n);
    SamplingOptions options;
    options.workers = cfg.sampler.workers;
    CsvWriter csv(ctx.out);
    csv.row(concat({"dataset", "generator", "tprime", "plan_length", "seed", "n"}, metric_header(cfg.metrics.names)));
    for (Step t : cfg.sweep_tprimes) {
        const SamplerPlan plan = plan_for(cfg, t);
        Rng rng = stream_rng(cfg.seed, kSampleStream);
        Rng metric_rng = stream_rng(cfg.seed, kMetricStream);
        Labels labels;
        const auto start = std::chrono::steady_clock::now();
        const SampleSet x = draw_samples(model, gen, plan, n, args.sampling.label, rng, options, labels);
        ctx.log("T'=" + std::to_string(t) + ": sampled in " + format_real(seconds_since(start)) + " s");
        csv.row(concat({to_string(cfg.dataset.kind), to_string(gen.kind()), std::to_string(t),
                        std::to_string(plan.sequence.size()), std::to_string(cfg.seed), std::to_string(n)},
                       metric_values(cfg, x, ref.data, metric_rng)));
    }
    return kExitOk;
}

struct EvaluateArgs {
    std::string samples;
    std::string reference;
};

int evaluate(const Context& ctx, const EvaluateArgs& args) {
    const RunConfig cfg = load_config(ctx);
    const Dataset gen = read_samples_csv(args.samples);
    const SampleSet ref = args.reference.empty() ? held_out(cfg, static_cast<int>(gen.data.cols())).data
                                                 : read_samples_csv(args.reference).data;
    Rng rng = stream_rng(cfg.seed, kMetricStream);
    CsvWriter csv(ctx.out);
    csv.row(concat({"samples", "reference", "n", "seed"}, metric_header(cfg.metrics.names)));
    csv.row(concat({args.samples, args.reference.empty() ? "held-out" : args.reference,
                    std::to_string(gen.data.cols()), std::to_string(cfg.seed)},
                   metric_values(cfg, gen.data, ref, rng)));
    return kExitOk;
}

int verify_suite(const Context& ctx) {
    const std::uint64_t seed = ctx.seed.value_or(0);
    const auto start = std::chrono::steady_clock::now();
    const verify::SuiteReport report = verify::run_invariant_suite(seed);
    CsvWriter csv(ctx.out);
    csv.row({"record", "name", "status", "l_vae", "l_ddpm", "bound", "exact_loglik", "gap", "mc_std_error", "detail"});
    for (std::size_t i = 0; i < report.elbo.size(); ++i) {
        const ElboReport& r = report.elbo[i];
        csv.row({"elbo", "instance_" + std::to_string(i), r.bound_holds() ? "holds" : "violated",
                 format_real(r.l_vae), format_real(r.l_ddpm), format_real(r.bound),
                 r.exact_loglik ? format_real(*r.exact_loglik) : "", r.gap ? format_real(*r.gap) : "",
                 format_real(r.mc_std_error), ""});
    }
    for (const auto& c : report.checks) {
        csv.row({"check", c.name, c.passed ? "pass" : "fail", "", "", "", "", "", "", c.detail});
    }
    ctx.log("suite: " + std::to_string(report.checks.size()) + " checks, " + std::to_string(report.failures()) +
            " failures in " + format_real(seconds_since(start)) + " s");
    return report.failures() == 0 ? kExitOk : kExitRuntime;
}

struct EditArgs {
    std::string model;
    std::string base;
    std::optional<int> refine;
    std::optional<double> offset;
    std::vector<int> mask;
    int count = 1;
    std::string plot;
};

int edit(const Context& ctx, const EditArgs& args) {
    RunConfig cfg = load_config(ctx);
    if (args.refine) cfg.edit.refine = *args.refine;
    if (args.offset) cfg.edit.offset = *args.offset;
    if (!args.mask.empty()) cfg.edit.mask = args.mask;
    ESDDPM_CHECK(args.count >= 1, ConfigError, "--count: must be positive");
    const DiffusionModel model = load_model(or_default(args.model, cfg, "model.ckpt"));
    const BaseGenerator gen = load_generator(or_default(args.base, cfg, "base.ckpt"));
    const int d = model.data_dim();
    ESDDPM_CHECK(gen.data_dim() == d, DimensionMismatch, "generator and model differ in data dimension");
    const Step h = cfg.edit.refine > 0 ? cfg.edit.refine : std::max(1, model.trained_horizon / 2);
    ESDDPM_CHECK(h >= 1 && h <= model.trained_horizon, ConfigError,
                 "edit.refine: must lie in [1, " + std::to_string(model.trained_horizon) + "]");
    std::vector<bool> mask(static_cast<std::size_t>(d), false);
    for (int i : cfg.edit.mask) {
        ESDDPM_CHECK(i >= 0 && i < d, ConfigError, "edit.mask: coordinate " + std::to_string(i) + " out of range");
        mask[static_cast<std::size_t>(i)] = true;
    }
    Rng rng = stream_rng(cfg.seed, kEditStream);
    SampleSet bases(d, args.count), edited(d, args.count), refined(d, args.count);
    std::vector<std::string> header{"index", "stage", "label"};
    for (int k = 0; k < d; ++k) header.push_back("x" + std::to_string(k));
    CsvWriter csv(ctx.out);
    csv.row(header);
    for (int i = 0; i < args.count; ++i) {
        const Label label = gen.conditional() ? Label(i % gen.class_count()) : std::nullopt;
        EditRequest req;
        req.base = generate(gen, rng, label);
        req.mask = mask;
        req.replacement = req.base.array() + cfg.edit.offset;
        req.refine_horizon = h;
        bases.col(i) = req.base;
        edited.col(i) = req.edited();
        refined.col(i) = edit_and_refine(model, req, rng, model.conditional() ? label : std::nullopt);
        const std::string lab = label ? std::to_string(*label) : "";
        for (const auto& [stage, set] : {std::pair<const char*, const SampleSet*>{"base", &bases},
                                         {"edited", &edited}, {"refined", &refined}}) {
            std::vector<std::string> row{std::to_string(i), stage, lab};
            for (int k = 0; k < d; ++k) row.push_back(format_real((*set)(k, i)));
            csv.row(row);
        }
    }
    ctx.log("edited " + std::to_string(args.count) + " samples, refined from step " + std::to_string(h));
    if (!args.plot.empty()) {
        if (d == 2) {
            emit_plot({bases, edited, refined}, args.plot);
        } else {
            SampleSet all(d, 3 * args.count);
            all << bases, edited, refined;
            emit_plot({all}, args.plot);
        }
    }
    return kExitOk;
}

void add_common(CLI::App* cmd, Context& ctx) {
    cmd->add_option("--config", ctx.config_path, "Run configuration (key = value lines)");
    cmd->add_option("--seed", ctx.seed, "Seed overriding the config");
}

void add_sampling(CLI::App* cmd, SampleArgs& a) {
    cmd->add_option("--model", a.model, "Diffusion checkpoint (default <output>/model.ckpt)");
    cmd->add_option("--base", a.base, "Generator checkpoint (default <output>/base.ckpt)");
    cmd->add_option("--plan-steps", a.plan_steps, "Denoising steps per sample (0 = every step)");
    cmd->add_option("--mode", a.mode, "ancestral or ddim")->check(CLI::IsMember({"ancestral", "ddim"}));
    cmd->add_option("--eta", a.eta, "DDIM stochasticity");
    cmd->add_option("--n", a.n, "Number of samples");
    cmd->add_option("--label", a.label, "Class label for conditional models");
    cmd->add_option("--workers", a.workers, "Sampling threads");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Early-stopped diffusion sampling on desk-scale data", "esddpm"};
    app.require_subcommand(1);
    Context ctx{out, err, {}, {}};

    FitBaseArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit-base", "Fit the base generator and save it");
    add_common(fit_cmd, ctx);
    fit_cmd->add_option("--base", fit_args.base, "Output checkpoint (default <output>/base.ckpt)");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train-diffusion", "Train the truncated denoiser and save it");
    add_common(train_cmd, ctx);
    train_cmd->add_option("--model", train_args.model, "Checkpoint path (default <output>/model.ckpt)");
    train_cmd->add_flag("--resume", train_args.resume, "Continue from the checkpoint if it exists");
    train_cmd->add_option("--iterations", train_args.iterations, "Total iterations (overrides the config)");
    train_cmd->add_option("--log-every", train_args.log_every, "Iterations per loss row");

    SampleArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "Draw early-stopped samples as CSV");
    add_common(sample_cmd, ctx);
    add_sampling(sample_cmd, sample_args);
    sample_cmd->add_option("--tprime", sample_args.tprime, "Injection step (default: model T')");
    sample_cmd->add_option("--plot", sample_args.plot, "Write an SVG or PGM plot");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Metric rows over a list of T' values");
    add_common(sweep_cmd, ctx);
    add_sampling(sweep_cmd, sweep_args.sampling);
    sweep_cmd->add_option("--tprimes", sweep_args.tprimes, "Comma-separated T' values")->delimiter(',');

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Metrics of a sample CSV against a reference");
    add_common(eval_cmd, ctx);
    eval_cmd->add_option("--samples", eval_args.samples, "Generated samples CSV")->required();
    eval_cmd->add_option("--reference", eval_args.reference, "Reference CSV (default: held-out data)");

    auto* verify_cmd = app.add_subcommand("verify", "Run the invariant and ELBO suite");
    add_common(verify_cmd, ctx);

    EditArgs edit_args;
    auto* edit_cmd = app.add_subcommand("edit", "Edit base samples and refine them");
    add_common(edit_cmd, ctx);
    edit_cmd->add_option("--model", edit_args.model, "Diffusion checkpoint (default <output>/model.ckpt)");
    edit_cmd->add_option("--base", edit_args.base, "Generator checkpoint (default <output>/base.ckpt)");
    edit_cmd->add_option("--refine", edit_args.refine, "Refine horizon (default T'/2)");
    edit_cmd->add_option("--offset", edit_args.offset, "Value added to masked coordinates");
    edit_cmd->add_option("--mask", edit_args.mask, "Comma-separated coordinates to edit")->delimiter(',');
    edit_cmd->add_option("--count", edit_args.count, "Number of edits");
    edit_cmd->add_option("--plot", edit_args.plot, "Write an SVG or PGM plot");

    if (argc >= 2 && argv[1][0] != '-') {
        const auto subs = app.get_subcommands([](const CLI::App*) { return true; });
        const bool known = std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->check_name(argv[1]); });
        if (!known) {
            err << "esddpm: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
            return kExitUsage;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "esddpm: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*fit_cmd) return fit_base(ctx, fit_args);
        if (*train_cmd) return train_diffusion(ctx, train_args);
        if (*sample_cmd) return sample(ctx, sample_args);
        if (*sweep_cmd) return sweep(ctx, sweep_args);
        if (*eval_cmd) return evaluate(ctx, eval_args);
        if (*verify_cmd) return verify_suite(ctx);
        if (*edit_cmd) return edit(ctx, edit_args);
    } catch (const ConfigError& e) {
        err << "esddpm: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "esddpm: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace esddpm::cli
