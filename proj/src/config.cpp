// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(trim(item));
    }
    return out;
}

template <typename T>
bool parse_int_list(const std::string& s, std::vector<T>& out) {
    out.clear();
    if (trim(s).empty()) {
        return true;
    }
    for (const auto& item : split_list(s)) {
        T v{};
        if (!parse_number(item, v)) {
            return false;
        }
        out.push_back(v);
    }
    return true;
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes") {
        out = true;
        return true;
    }
    if (s == "false" || s == "0" || s == "no") {
        out = false;
        return true;
    }
    return false;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? sep : "") + items[i];
    }
    return out;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        const std::string body = trim(line);
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(number) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw ConfigError(key + ": duplicate key (line " + std::to_string(number) + ")");
        }
    }
    return kv;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::vector<std::string> config_issues(const RunConfig& c) {
    std::vector<std::string> issues;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) {
            issues.push_back(msg);
        }
    };
    const auto& d = c.dataset;
    require(d.size >= 2, "dataset.size: must be at least 2");
    require(std::isfinite(d.noise) && d.noise >= 0.0, "dataset.noise: must be finite and >= 0");
    if (d.kind == DatasetKind::gaussian_ring || d.kind == DatasetKind::class_ring) {
        require(d.modes >= 1, "dataset.modes: must be positive");
        require(d.radius > 0.0, "dataset.radius: must be positive");
    }
    const auto& s = c.schedule;
    require(s.horizon >= 1, "schedule.horizon: must be positive");
    require(s.beta_start > 0.0 && s.beta_start < 1.0, "schedule.beta_start: must lie in (0, 1)");
    require(s.beta_end > 0.0 && s.beta_end < 1.0, "schedule.beta_end: must lie in (0, 1)");
    require(s.beta_start <= s.beta_end, "schedule.beta_start: must not exceed schedule.beta_end");

    const auto& m = c.model;
    require(m.tprime >= 1, "model.tprime: must be at least 1");
    require(m.tprime <= s.horizon, "model.tprime: exceeds schedule.horizon");
    require(!m.hidden.empty(), "model.hidden: needs at least one layer");
    require(std::all_of(m.hidden.begin(), m.hidden.end(), [](int h) { return h >= 1; }),
            "model.hidden: widths must be positive");
    require(m.time_embed_dim >= 2 && m.time_embed_dim % 2 == 0, "model.time_embed: must be even and >= 2");
    require(!m.conditional || dataset_labeled(d.kind), "model.conditional: dataset has no labels");

    require(c.train.batch_size >= 1, "train.batch_size: must be positive");
    require(c.train.iterations >= 0, "train.iterations: must be >= 0");
    require(c.train.learning_rate > 0.0 && std::isfinite(c.train.learning_rate),
            "train.lr: must be positive");
    require(c.train.final_lr_fraction > 0.0 && c.train.final_lr_fraction <= 1.0,
            "train.lr_final_fraction: must lie in (0, 1]");

    const auto& g = c.generator;
    if (g.kind == GeneratorKind::gmm) {
        require(g.components >= 1, "generator.components: must be positive");
        require(g.components <= d.size, "generator.components: exceeds dataset.size");
    }
    if (g.kind == GeneratorKind::vae) {
        require(g.vae_latent >= 1, "generator.vae_latent: must be positive");
        require(g.vae_iterations >= 1, "generator.vae_iterations: must be positive");
    }
    if (g.kind == GeneratorKind::oracle) {
        require(g.oracle_jitter >= 0.0, "generator.oracle_jitter: must be >= 0");
    }

    const auto& p = c.sampler;
    require(p.steps >= 0, "sampler.steps: must be >= 0");
    require(p.steps <= m.tprime, "sampler.steps: exceeds model.tprime");
    require(p.steps != 1 || m.tprime == 1, "sampler.steps: a single step cannot span T' > 1");
    require(p.eta >= 0.0 && p.eta <= 1.0, "sampler.eta: must lie in [0, 1]");
    require(p.mode == SamplerMode::ddim || p.eta == 0.0, "sampler.eta: only meaningful in ddim mode");
    require(p.samples >= 2, "sampler.samples: must be at least 2");
    require(p.workers >= 1, "sampler.workers: must be positive");

    const auto& mt = c.metrics;
    for (const auto& name : mt.names) {
        require(std::find(kMetricNames.begin(), kMetricNames.end(), name) != kMetricNames.end(),
                "metrics.set: unknown metric '" + name + "'");
    }
    require(mt.permutations >= 0, "metrics.permutations: must be >= 0");
    require(std::find(mt.names.begin(), mt.names.end(), "perm") == mt.names.end() || mt.permutations >= 1,
            "metrics.permutations: 'perm' metric needs at least one permutation");
    require(mt.knn_k >= 1, "metrics.knn_k: must be positive");
    require(mt.knn_k < std::min(p.samples, d.size), "metrics.knn_k: must be below the sample count");
    require(mt.projections >= 1, "metrics.projections: must be positive");

    require(!c.sweep_tprimes.empty(), "sweep.tprimes: must not be empty");
    for (Step t : c.sweep_tprimes) {
        require(t >= 0 && t <= m.tprime, "sweep.tprimes: " + std::to_string(t) + " outside [0, model.tprime]");
    }

    const int dim = dataset_dim(d.kind);
    for (int i : c.edit.mask) {
        require(i >= 0 && i < dim, "edit.mask: coordinate " + std::to_string(i) + " outside the data dimension");
    }
    require(c.edit.refine >= 0 && c.edit.refine <= m.tprime, "edit.refine: must lie in [0, model.tprime]");
    require(!c.output_dir.empty(), "output.dir: must not be empty");
    return issues;
}

void validate(const RunConfig& config) {
    const auto issues = config_issues(config);
    if (!issues.empty()) {
        throw ConfigError("invalid config:\n  " + join(issues, "\n  "));
    }
}

RunConfig run_config_from(const KeyValues& kv) {
    RunConfig c;
    std::vector<std::string> issues;
    using Setter = std::function<bool(const std::string&)>;
    auto integer = [](auto& field) {
        return Setter([&field](const std::string& v) { return parse_number(v, field); });
    };
    auto real = [](double& field) {
        return Setter([&field](const std::string& v) { return parse_number(v, field) && std::isfinite(field); });
    };
    const std::map<std::string, Setter> setters = {
        {"dataset.kind",
         [&](const std::string& v) {
             c.dataset.kind = parse_dataset_kind(v);
             return true;
         }},
        {"dataset.size", integer(c.dataset.size)},
        {"dataset.noise", real(c.dataset.noise)},
        {"dataset.modes", integer(c.dataset.modes)},
        {"dataset.radius", real(c.dataset.radius)},
        {"dataset.seed", integer(c.dataset.seed)},
        {"schedule.horizon", integer(c.schedule.horizon)},
        {"schedule.beta_start", real(c.schedule.beta_start)},
        {"schedule.beta_end", real(c.schedule.beta_end)},
        {"model.tprime", integer(c.model.tprime)},
        {"model.sigma",
         [&](const std::string& v) {
             if (v == "beta") c.model.sigma = SigmaMode::beta;
             else if (v == "beta_tilde") c.model.sigma = SigmaMode::beta_tilde;
             else return false;
             return true;
         }},
        {"model.hidden", [&](const std::string& v) { return parse_int_list(v, c.model.hidden); }},
        {"model.time_embed", integer(c.model.time_embed_dim)},
        {"model.activation",
         [&](const std::string& v) {
             if (v == "tanh") c.model.activation = Activation::tanh;
             else if (v == "silu") c.model.activation = Activation::silu;
             else return false;
             return true;
         }},
        {"model.conditional", [&](const std::string& v) { return parse_bool(v, c.model.conditional); }},
        {"train.iterations", integer(c.train.iterations)},
        {"train.batch_size", integer(c.train.batch_size)},
        {"train.lr", real(c.train.learning_rate)},
        {"train.lr_final_fraction", real(c.train.final_lr_fraction)},
        {"generator.kind",
         [&](const std::string& v) {
             if (v == "gmm") c.generator.kind = GeneratorKind::gmm;
             else if (v == "vae") c.generator.kind = GeneratorKind::vae;
             else if (v == "oracle") c.generator.kind = GeneratorKind::oracle;
             else return false;
             return true;
         }},
        {"generator.components", integer(c.generator.components)},
        {"generator.vae_latent", integer(c.generator.vae_latent)},
        {"generator.vae_iterations", integer(c.generator.vae_iterations)},
        {"generator.oracle_jitter", real(c.generator.oracle_jitter)},
        {"sampler.mode",
         [&](const std::string& v) {
             if (v == "ancestral") c.sampler.mode = SamplerMode::ancestral;
             else if (v == "ddim") c.sampler.mode = SamplerMode::ddim;
             else return false;
             return true;
         }},
        {"sampler.steps", integer(c.sampler.steps)},
        {"sampler.eta", real(c.sampler.eta)},
        {"sampler.samples", integer(c.sampler.samples)},
        {"sampler.workers", integer(c.sampler.workers)},
        {"metrics.set",
         [&](const std::string& v) {
             c.metrics.names = split_list(v);
             return true;
         }},
        {"metrics.permutations", integer(c.metrics.permutations)},
        {"metrics.knn_k", integer(c.metrics.knn_k)},
        {"metrics.projections", integer(c.metrics.projections)},
        {"edit.offset", real(c.edit.offset)},
        {"edit.mask", [&](const std::string& v) { return parse_int_list(v, c.edit.mask); }},
        {"edit.refine", integer(c.edit.refine)},
        {"sweep.tprimes", [&](const std::string& v) { return parse_int_list(v, c.sweep_tprimes); }},
        {"seed", integer(c.seed)},
        {"output.dir",
         [&](const std::string& v) {
             c.output_dir = v;
             return true;
         }},
    };
    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) {
            issues.push_back(key + ": unknown key");
            continue;
        }
        try {
            if (!it->second(value)) {
                issues.push_back(key + ": malformed value '" + value + "'");
            }
        } catch (const ConfigError& e) {
            issues.push_back(e.what());
        }
    }
    if (issues.empty()) {
        c.train.seed = c.seed;
        c.train.horizon = c.model.tprime;
        issues = config_issues(c);
    }
    if (!issues.empty()) {
        throw ConfigError("invalid config:\n  " + join(issues, "\n  "));
    }
    return c;
}

RunConfig load_run_config(const std::string& path) { return run_config_from(load_key_values(path)); }

std::string resolve_output_dir(const RunConfig& config) {
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return config.output_dir;
}

SamplerPlan plan_for(const RunConfig& config, Step horizon) {
    const int steps = config.sampler.steps;
    if (horizon == 0 || steps == 0 || steps >= horizon) {
        return full_plan(horizon, config.sampler.mode, config.sampler.eta);
    }
    return uniform_plan(horizon, steps, config.sampler.mode, config.sampler.eta);
}

NoiseSchedule schedule_for(const RunConfig& config) {
    return NoiseSchedule::linear(config.schedule.horizon, config.schedule.beta_start, config.schedule.beta_end);
}

}  // namespace esddpm
