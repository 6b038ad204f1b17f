// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "esddpm/basegen.hpp"
#include "esddpm/datasets.hpp"
#include "esddpm/diffusion.hpp"
#include "esddpm/essampler.hpp"

namespace esddpm {

/// Output directory override; takes precedence over `output.dir`.
inline constexpr const char* kOutputDirEnv = "ESDDPM_OUTPUT_DIR";

/// Parsed `key = value` lines. `#` starts a comment; blank lines are skipped.
using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError on malformed lines or duplicate keys.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::string& path);

struct ScheduleConfig {
    int horizon = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct ModelConfig {
    Step tprime = 100;
    SigmaMode sigma = SigmaMode::beta_tilde;
    std::vector<int> hidden = {128, 128};
    int time_embed_dim = 32;
    Activation activation = Activation::tanh;
    bool conditional = false;
};

struct GeneratorConfig {
    GeneratorKind kind = GeneratorKind::gmm;
    int components = 8;
    int vae_latent = 2;
    int vae_iterations = 3000;
    double oracle_jitter = 1e-3;
};

struct SamplerConfig {
    SamplerMode mode = SamplerMode::ancestral;
    int steps = 0;  // 0 = every step of T'
    double eta = 0.0;
    int samples = 1000;
    int workers = 1;
};

struct MetricConfig {
    std::vector<std::string> names = {"energy", "mmd", "sw", "prd"};
    int permutations = 0;
    int knn_k = 5;
    int projections = 128;
};

struct EditConfig {
    double offset = 0.5;  // added to masked coordinates
    std::vector<int> mask = {1};
    int refine = 0;  // 0 = T'/2
};

struct RunConfig {
    DatasetSpec dataset;
    ScheduleConfig schedule;
    ModelConfig model;
    TrainConfig train;
    GeneratorConfig generator;
    SamplerConfig sampler;
    MetricConfig metrics;
    EditConfig edit;
    std::vector<Step> sweep_tprimes = {0, 25, 50, 100};
    std::uint64_t seed = 0;
    std::string output_dir = "esddpm-out";
};

inline const std::vector<std::string> kMetricNames = {"energy", "mmd", "sw", "prd", "perm"};

/// Field diagnostics ("key: problem"); empty when the config is consistent.
std::vector<std::string> config_issues(const RunConfig& config);

/// Throws ConfigError listing every diagnostic.
void validate(const RunConfig& config);

/// Builds a RunConfig from key-values on top of defaults, then validates.
/// Unknown keys and malformed values are diagnostics too.
RunConfig run_config_from(const KeyValues& kv);
RunConfig load_run_config(const std::string& path);

/// `output_dir`, unless the override environment variable is set.
std::string resolve_output_dir(const RunConfig& config);

SamplerPlan plan_for(const RunConfig& config, Step horizon);
NoiseSchedule schedule_for(const RunConfig& config);

}  // namespace esddpm
