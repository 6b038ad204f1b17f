// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>

#include "esddpm/rng.hpp"
#include "esddpm/types.hpp"

namespace esddpm {

/// 2 E|a-b| - E|a-a'| - E|b-b'| with all pairwise sums taken over full grids
/// (V-statistic), so identical inputs give exactly zero. Needs |A|,|B| >= 2.
double energy_distance(const SampleSet& a, const SampleSet& b, int workers = 1);

struct MmdResult {
    double value = 0.0;
    double bandwidth = 0.0;
};

enum class MmdEstimator { unbiased, biased };

/// Median of pairwise distances over the pooled set. Uses a fixed strided
/// subset of at most 2000 points for large inputs.
double median_heuristic_bandwidth(const SampleSet& a, const SampleSet& b);

/// Squared MMD with kernel exp(-|x-y|^2 / (2 h^2)). Median heuristic when
/// `bandwidth` is empty.
MmdResult mmd_rbf(const SampleSet& a, const SampleSet& b, std::optional<double> bandwidth = std::nullopt,
                  MmdEstimator estimator = MmdEstimator::unbiased);

/// Exact 1-D Wasserstein-1 between empirical measures (any sizes).
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct SlicedWasserstein {
    double value = 0.0;
    int projections = 0;
};

SlicedWasserstein sliced_wasserstein(const SampleSet& a, const SampleSet& b, int n_projections, Rng& rng);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// Distance from each column to its k-th nearest other column.
Vector knn_radii(const SampleSet& points, int k);

/// Fraction of `queries` inside the union of k-NN balls of `support`.
double manifold_coverage(const SampleSet& queries, const SampleSet& support, int k);

PrecisionRecall knn_precision_recall(const SampleSet& generated, const SampleSet& reference, int k = 5);

using TwoSampleStatistic = std::function<double(const SampleSet&, const SampleSet&)>;

/// p = (1 + #{permuted statistic >= observed}) / (1 + n_perms).
double permutation_test(const SampleSet& a, const SampleSet& b, int n_perms, Rng& rng,
                        const TwoSampleStatistic& statistic = {});

struct MetricOptions {
    int knn_k = 5;
    int projections = 128;
    std::optional<double> bandwidth;
    int permutations = 0;  // 0 skips the test
    int workers = 1;
};

struct MetricReport {
    double energy_distance = 0.0;
    double mmd_rbf = 0.0;
    double mmd_bandwidth = 0.0;
    double sliced_wasserstein = 0.0;
    int sw_projections = 0;
    double knn_precision = 0.0;
    double knn_recall = 0.0;
    std::optional<double> permutation_p;

    void validate() const;
};

MetricReport evaluate_metrics(const SampleSet& generated, const SampleSet& reference, const MetricOptions& options,
                              Rng& rng);

}  // namespace esddpm
