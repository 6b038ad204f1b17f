// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "esddpm/basegen.hpp"
#include "esddpm/errors.hpp"

namespace esddpm::verify {

Network random_network(const NetworkConfig& config, Rng& rng, double scale) {
    Network net(config, rng);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto view : net.mutable_params().views()) {
        for (double& v : view) {
            v = u(rng);
        }
    }
    return net;
}

GradientBuffer central_difference(const ParameterTensors& at,
                                  const std::function<double(const ParameterTensors&)>& f, double h) {
    ParameterTensors probe = at;
    GradientBuffer out = at.zeros_like();
    auto probe_views = probe.views();
    auto out_views = out.views();
    for (std::size_t v = 0; v < probe_views.size(); ++v) {
        for (std::size_t i = 0; i < probe_views[v].size(); ++i) {
            const double saved = probe_views[v][i];
            const double step = h * std::max(1.0, std::abs(saved));
            probe_views[v][i] = saved + step;
            const double up = f(probe);
            probe_views[v][i] = saved - step;
            const double down = f(probe);
            probe_views[v][i] = saved;
            out_views[v][i] = (up - down) / (2.0 * step);
        }
    }
    return out;
}

double max_relative_error(const ParameterTensors& analytic, const ParameterTensors& numeric, double floor) {
    ESDDPM_CHECK(analytic.same_shape(numeric), DimensionMismatch, "gradient shapes differ");
    const auto a = analytic.views();
    const auto n = numeric.views();
    double worst = 0.0;
    for (std::size_t v = 0; v < a.size(); ++v) {
        for (std::size_t i = 0; i < a[v].size(); ++i) {
            const double denom = std::max({std::abs(a[v][i]), std::abs(n[v][i]), floor});
            worst = std::max(worst, std::abs(a[v][i] - n[v][i]) / denom);
        }
    }
    return worst;
}

double network_gradient_error(const Network& net, const Matrix& x, std::span<const Step> steps,
                              const Labels& labels, const Matrix& upstream) {
    ForwardCache cache;
    net.forward(x, steps, labels, &cache);
    const GradientBuffer analytic = net.backward(cache, upstream).grads;
    const GradientBuffer numeric = central_difference(net.params(), [&](const ParameterTensors& p) {
        const Network probe(net.config(), p);
        return (probe.forward(x, steps, labels).array() * upstream.array()).sum();
    });
    return max_relative_error(analytic, numeric);
}

namespace {

// Composite Simpson over [lo, hi] with n (even) panels.
template <typename F>
double simpson(F&& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    }
    return s * h / 3.0;
}

}  // namespace

Moments quadrature_posterior(const NoiseSchedule& schedule, Step t, double x0, double xt) {
    ESDDPM_CHECK(t >= 2, InvalidArgument, "quadrature posterior needs t >= 2");
    const double prior_mean = std::sqrt(schedule.alpha_bar(t - 1)) * x0;
    const double prior_var = schedule.one_minus_alpha_bar(t - 1);
    const double a = std::sqrt(schedule.alpha(t));
    const double b = schedule.beta(t);
    auto log_density = [&](double y) {
        const double p = y - prior_mean;
        const double l = xt - a * y;
        return -0.5 * p * p / prior_var - 0.5 * l * l / b;
    };
    // Locate the bulk on a wide grid first, then integrate around it.
    const double width = 40.0 * std::max(std::sqrt(prior_var), std::sqrt(b) / a);
    double lo = std::min(prior_mean, xt / a) - width;
    double hi = std::max(prior_mean, xt / a) + width;
    const int coarse = 200000;
    double peak = lo;
    double best = -INFINITY;
    for (int i = 0; i <= coarse; ++i) {
        const double y = lo + (hi - lo) * i / coarse;
        const double v = log_density(y);
        if (v > best) {
            best = v;
            peak = y;
        }
    }
    double left = peak;
    double right = peak;
    const double step = (hi - lo) / coarse;
    while (log_density(left) > best - 60.0) {
        left -= step;
    }
    while (log_density(right) > best - 60.0) {
        right += step;
    }
    auto weight = [&](double y) { return std::exp(log_density(y) - best); };
    const int n = 20000;
    const double z = simpson(weight, left, right, n);
    const double m = simpson([&](double y) { return y * weight(y); }, left, right, n) / z;
    const double v = simpson([&](double y) { return (y - m) * (y - m) * weight(y); }, left, right, n) / z;
    return {m, v};
}

AnalyticBound analytic_linear_bound(const LinearGaussianInstance& inst) {
    inst.validate();
    const NoiseSchedule& s = inst.schedule;
    const double x0 = inst.x0;
    AnalyticBound out;

    const double c1 = reconstruction_weight(s, inst.horizon);
    const double me = inst.encoder_gain * x0 + inst.encoder_shift;
    const double ve = inst.encoder_var;
    const double a = inst.decoder_scale;
    const double resid = x0 - a * me - inst.decoder_shift;
    out.l_vae = 0.5 * (me * me + ve - 1.0 - std::log(ve)) + c1 * (resid * resid + a * a * ve);

    for (Step t = 2; t <= inst.horizon; ++t) {
        const LinearReverse& r = inst.reverse[static_cast<std::size_t>(t - 1)];
        const double u_t = s.one_minus_alpha_bar(t);
        const double A = std::sqrt(s.alpha_bar(t - 1)) * s.beta(t) / u_t;
        const double B = std::sqrt(s.alpha(t)) * s.one_minus_alpha_bar(t - 1) / u_t;
        const double var_q = s.beta(t) * s.one_minus_alpha_bar(t - 1) / u_t;
        const double mean_diff = A * x0 + (B - r.gain) * std::sqrt(s.alpha_bar(t)) * x0 - r.shift;
        const double sq = mean_diff * mean_diff + (B - r.gain) * (B - r.gain) * u_t;
        out.l_ddpm += 0.5 * (var_q / r.variance - 1.0 + std::log(r.variance / var_q) + sq / r.variance);
    }
    const LinearReverse& r1 = inst.reverse.front();
    const double m1 = x0 - r1.gain * std::sqrt(s.alpha_bar(1)) * x0 - r1.shift;
    const double sq1 = m1 * m1 + r1.gain * r1.gain * s.one_minus_alpha_bar(1);
    out.l_ddpm += 0.5 * std::log(2.0 * std::numbers::pi * r1.variance) + sq1 / (2.0 * r1.variance);
    return out;
}

double best_in_family_gap(const LinearGaussianInstance& inst) {
    const double ab = inst.schedule.alpha_bar(inst.horizon);
    const double r = ab * inst.decoder_scale * inst.decoder_scale / inst.schedule.one_minus_alpha_bar(inst.horizon);
    return r / (2.0 * (1.0 + r));
}

double energy_distance_reference(const SampleSet& a, const SampleSet& b) {
    auto mean_dist = [](const SampleSet& x, const SampleSet& y) {
        long double s = 0.0L;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            for (Eigen::Index j = 0; j < y.cols(); ++j) {
                long double sq = 0.0L;
                for (Eigen::Index k = 0; k < x.rows(); ++k) {
                    const long double d = static_cast<long double>(x(k, i)) - y(k, j);
                    sq += d * d;
                }
                s += std::sqrt(sq);
            }
        }
        return static_cast<double>(s / (static_cast<long double>(x.cols()) * y.cols()));
    };
    return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

double mmd_reference(const SampleSet& a, const SampleSet& b, double bandwidth, bool biased) {
    auto k = [&](const SampleSet& x, Eigen::Index i, const SampleSet& y, Eigen::Index j) {
        long double sq = 0.0L;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const long double d = static_cast<long double>(x(r, i)) - y(r, j);
            sq += d * d;
        }
        return std::exp(-sq / (2.0L * bandwidth * bandwidth));
    };
    auto within = [&](const SampleSet& x) {
        long double s = 0.0L;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                if (biased || i != j) {
                    s += k(x, i, x, j);
                }
            }
        }
        const long double n = x.cols();
        return s / (biased ? n * n : n * (n - 1));
    };
    long double cross = 0.0L;
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            cross += k(a, i, b, j);
        }
    }
    cross /= static_cast<long double>(a.cols()) * b.cols();
    return static_cast<double>(within(a) + within(b) - 2.0L * cross);
}

PrecisionRecall knn_reference(const SampleSet& generated, const SampleSet& reference, int k) {
    auto coverage = [k](const SampleSet& q, const SampleSet& s) {
        std::vector<double> radius;
        for (Eigen::Index i = 0; i < s.cols(); ++i) {
            std::vector<double> d;
            for (Eigen::Index j = 0; j < s.cols(); ++j) {
                if (j != i) {
                    d.push_back((s.col(i) - s.col(j)).norm());
                }
            }
            std::sort(d.begin(), d.end());
            radius.push_back(d[static_cast<std::size_t>(k - 1)]);
        }
        int inside = 0;
        for (Eigen::Index i = 0; i < q.cols(); ++i) {
            bool hit = false;
            for (Eigen::Index j = 0; j < s.cols() && !hit; ++j) {
                hit = (q.col(i) - s.col(j)).norm() <= radius[static_cast<std::size_t>(j)];
            }
            inside += hit ? 1 : 0;
        }
        return static_cast<double>(inside) / static_cast<double>(q.cols());
    };
    return {coverage(generated, reference), coverage(reference, generated)};
}

double w1_quantile_reference(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Breakpoints of both quantile step functions on (0, 1).
    std::vector<double> cuts = {0.0, 1.0};
    for (std::size_t i = 1; i < a.size(); ++i) cuts.push_back(static_cast<double>(i) / a.size());
    for (std::size_t i = 1; i < b.size(); ++i) cuts.push_back(static_cast<double>(i) / b.size());
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double width = cuts[i + 1] - cuts[i];
        if (width <= 0.0) continue;
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        const double qa = a[std::min(a.size() - 1, static_cast<std::size_t>(mid * a.size()))];
        const double qb = b[std::min(b.size() - 1, static_cast<std::size_t>(mid * b.size()))];
        total += width * std::abs(qa - qb);
    }
    return total;
}

double gaussian_energy_distance_1d(double mu, double sigma) {
    // E|X - Y| for X - Y ~ N(m, 2 s^2).
    auto folded_mean = [](double m, double s) {
        return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2.0 * s * s)) +
               m * std::erf(m / (s * std::sqrt(2.0)));
    };
    const double s = sigma * std::sqrt(2.0);
    return 2.0 * folded_mean(mu, s) - 2.0 * folded_mean(0.0, s);
}

}  // namespace esddpm::verify
