// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esddpm/errors.hpp"
#include "esddpm/parallel.hpp"

namespace esddpm {

namespace {

constexpr std::int64_t kRowChunk = 64;

// sum_{i,j} |x_i - y_j| with a fixed reduction order.
double cross_distance_sum(const SampleSet& x, const SampleSet& y, int workers) {
    Vector rows(x.cols());
    for_each_chunk(x.cols(), kRowChunk, workers, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < y.cols(); ++j) {
                s += (x.col(i) - y.col(j)).norm();
            }
            rows[i] = s;
        }
    });
    double total = 0.0;
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        total += rows[i];
    }
    return total;
}

void check_pair(const SampleSet& a, const SampleSet& b, Eigen::Index min_size, const char* what) {
    ESDDPM_CHECK(a.rows() == b.rows(), DimensionMismatch, std::string(what) + ": sample dimensions differ");
    ESDDPM_CHECK(a.cols() >= min_size && b.cols() >= min_size, InvalidArgument,
                 std::string(what) + ": sample sets too small");
}

SampleSet gather(const SampleSet& pooled, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
    SampleSet out(pooled.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) {
        out.col(static_cast<Eigen::Index>(i - begin)) = pooled.col(idx[i]);
    }
    return out;
}

}  // namespace

double energy_distance(const SampleSet& a, const SampleSet& b, int workers) {
    check_pair(a, b, 2, "energy_distance");
    const double n = static_cast<double>(a.cols());
    const double m = static_cast<double>(b.cols());
    const double ab = cross_distance_sum(a, b, workers) / (n * m);
    const double aa = cross_distance_sum(a, a, workers) / (n * n);
    const double bb = cross_distance_sum(b, b, workers) / (m * m);
    return std::max(0.0, 2.0 * ab - aa - bb);
}

double median_heuristic_bandwidth(const SampleSet& a, const SampleSet& b) {
    check_pair(a, b, 1, "median_heuristic_bandwidth");
    SampleSet pooled(a.rows(), a.cols() + b.cols());
    pooled << a, b;
    const Eigen::Index limit = 2000;
    const Eigen::Index stride = std::max<Eigen::Index>(1, (pooled.cols() + limit - 1) / limit);
    std::vector<double> dists;
    for (Eigen::Index i = 0; i < pooled.cols(); i += stride) {
        for (Eigen::Index j = i + stride; j < pooled.cols(); j += stride) {
            dists.push_back((pooled.col(i) - pooled.col(j)).norm());
        }
    }
    ESDDPM_CHECK(!dists.empty(), InvalidArgument, "median heuristic needs at least two points");
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    const double h = *mid;
    ESDDPM_CHECK(h > 0.0, NumericalError, "median pairwise distance is zero");
    return h;
}

MmdResult mmd_rbf(const SampleSet& a, const SampleSet& b, std::optional<double> bandwidth, MmdEstimator estimator) {
    check_pair(a, b, 2, "mmd_rbf");
    const double h = bandwidth ? *bandwidth : median_heuristic_bandwidth(a, b);
    ESDDPM_CHECK(h > 0.0 && std::isfinite(h), InvalidArgument, "bandwidth must be positive");
    const double scale = 1.0 / (2.0 * h * h);
    const bool unbiased = estimator == MmdEstimator::unbiased;
    auto within = [&](const SampleSet& x) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                if (unbiased && i == j) {
                    continue;
                }
                s += std::exp(-(x.col(i) - x.col(j)).squaredNorm() * scale);
            }
        }
        const double n = static_cast<double>(x.cols());
        return s / (unbiased ? n * (n - 1.0) : n * n);
    };
    double cross = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            cross += std::exp(-(a.col(i) - b.col(j)).squaredNorm() * scale);
        }
    }
    cross /= static_cast<double>(a.cols()) * static_cast<double>(b.cols());
    double value = within(a) + within(b) - 2.0 * cross;
    if (!unbiased) {
        value = std::max(0.0, value);
    }
    return {value, h};
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    ESDDPM_CHECK(!a.empty() && !b.empty(), InvalidArgument, "wasserstein_1d: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += std::abs(a[i] - b[i]);
        }
        return s / static_cast<double>(a.size());
    }
    // Integral of |F_a - F_b| over the merged breakpoints.
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double prev = std::min(a.front(), b.front());
    double total = 0.0;
    while (i < a.size() || j < b.size()) {
        double next;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
            next = a[i];
        } else {
            next = b[j];
        }
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
        while (i < a.size() && a[i] == next) {
            ++i;
        }
        while (j < b.size() && b[j] == next) {
            ++j;
        }
        prev = next;
    }
    return total;
}

SlicedWasserstein sliced_wasserstein(const SampleSet& a, const SampleSet& b, int n_projections, Rng& rng) {
    check_pair(a, b, 1, "sliced_wasserstein");
    ESDDPM_CHECK(n_projections >= 1, InvalidArgument, "n_projections must be positive");
    double total = 0.0;
    for (int p = 0; p < n_projections; ++p) {
        Vector dir = standard_normal(rng, a.rows());
        while (dir.norm() == 0.0) {
            dir = standard_normal(rng, a.rows());
        }
        dir.normalize();
        const Vector pa = a.transpose() * dir;
        const Vector pb = b.transpose() * dir;
        total += wasserstein_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                                std::vector<double>(pb.data(), pb.data() + pb.size()));
    }
    return {total / n_projections, n_projections};
}

Vector knn_radii(const SampleSet& points, int k) {
    ESDDPM_CHECK(k >= 1, InvalidArgument, "k must be positive");
    ESDDPM_CHECK(points.cols() > k, InvalidArgument, "k-NN needs more than k points");
    Vector radii(points.cols());
    std::vector<double> dists(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
        for (Eigen::Index j = 0; j < points.cols(); ++j) {
            dists[static_cast<std::size_t>(j)] = (points.col(i) - points.col(j)).squaredNorm();
        }
        // Position 0 is the point itself (distance 0).
        std::nth_element(dists.begin(), dists.begin() + k, dists.end());
        radii[i] = std::sqrt(dists[static_cast<std::size_t>(k)]);
    }
    return radii;
}

double manifold_coverage(const SampleSet& queries, const SampleSet& support, int k) {
    check_pair(queries, support, 1, "manifold_coverage");
    const Vector radii = knn_radii(support, k);
    const Vector r2 = radii.array().square();
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < queries.cols(); ++i) {
        for (Eigen::Index j = 0; j < support.cols(); ++j) {
            if ((queries.col(i) - support.col(j)).squaredNorm() <= r2[j]) {
                ++inside;
                break;
            }
        }
    }
    return static_cast<double>(inside) / static_cast<double>(queries.cols());
}

PrecisionRecall knn_precision_recall(const SampleSet& generated, const SampleSet& reference, int k) {
    return {manifold_coverage(generated, reference, k), manifold_coverage(reference, generated, k)};
}

double permutation_test(const SampleSet& a, const SampleSet& b, int n_perms, Rng& rng,
                        const TwoSampleStatistic& statistic) {
    ESDDPM_CHECK(n_perms >= 1, InvalidArgument, "n_perms must be positive");
    check_pair(a, b, 2, "permutation_test");
    const TwoSampleStatistic stat =
        statistic ? statistic : TwoSampleStatistic([](const SampleSet& x, const SampleSet& y) { return energy_distance(x, y); });
    const double observed = stat(a, b);
    SampleSet pooled(a.rows(), a.cols() + b.cols());
    pooled << a, b;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.cols()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const auto n = static_cast<std::size_t>(a.cols());
    int extreme = 0;
    for (int p = 0; p < n_perms; ++p) {
        std::shuffle(idx.begin(), idx.end(), rng);
        if (stat(gather(pooled, idx, 0, n), gather(pooled, idx, n, idx.size())) >= observed) {
            ++extreme;
        }
    }
    return (1.0 + extreme) / (1.0 + n_perms);
}

void MetricReport::validate() const {
    for (double v : {energy_distance, mmd_rbf, mmd_bandwidth, sliced_wasserstein, knn_precision, knn_recall}) {
        ESDDPM_CHECK(std::isfinite(v), NumericalError, "metric report contains a non-finite value");
    }
    ESDDPM_CHECK(energy_distance >= 0.0 && sliced_wasserstein >= 0.0, NumericalError, "negative distance");
    ESDDPM_CHECK(knn_precision >= 0.0 && knn_precision <= 1.0 && knn_recall >= 0.0 && knn_recall <= 1.0,
                 NumericalError, "precision/recall outside [0, 1]");
    if (permutation_p) {
        ESDDPM_CHECK(*permutation_p >= 0.0 && *permutation_p <= 1.0, NumericalError, "p-value outside [0, 1]");
    }
}

MetricReport evaluate_metrics(const SampleSet& generated, const SampleSet& reference, const MetricOptions& options,
                              Rng& rng) {
    MetricReport report;
    report.energy_distance = energy_distance(generated, reference, options.workers);
    const MmdResult mmd = mmd_rbf(generated, reference, options.bandwidth);
    report.mmd_rbf = std::max(0.0, mmd.value);
    report.mmd_bandwidth = mmd.bandwidth;
    const SlicedWasserstein sw = sliced_wasserstein(generated, reference, options.projections, rng);
    report.sliced_wasserstein = sw.value;
    report.sw_projections = sw.projections;
    const PrecisionRecall pr = knn_precision_recall(generated, reference, options.knn_k);
    report.knn_precision = pr.precision;
    report.knn_recall = pr.recall;
    if (options.permutations > 0) {
        report.permutation_p = permutation_test(generated, reference, options.permutations, rng);
    }
    report.validate();
    return report;
}

}  // namespace esddpm
