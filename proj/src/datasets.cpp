// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/datasets.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "esddpm/errors.hpp"
#include "esddpm/rng.hpp"

namespace esddpm {

namespace {

// '#' = ink (+1), '.' = background (-1).
constexpr std::array<const char*, kRasterGlyphCount> kGlyphs = {
    "........"
    "...##..."
    "...##..."
    ".######."
    ".######."
    "...##..."
    "...##..."
    "........",

    "........"
    ".######."
    ".#....#."
    ".#....#."
    ".#....#."
    ".#....#."
    ".######."
    "........",

    "#......."
    ".#......"
    "..#....."
    "...#...."
    "....#..."
    ".....#.."
    "......#."
    ".......#",

    "........"
    "..####.."
    ".#....#."
    ".#....#."
    ".#....#."
    ".#....#."
    "..####.."
    "........",

    "........"
    "........"
    "########"
    "........"
    "........"
    "########"
    "........"
    "........",

    "##....##"
    "##....##"
    "..#..#.."
    "...##..."
    "...##..."
    "..#..#.."
    "##....##"
    "##....##",
};

void check_spec(const DatasetSpec& spec) {
    ESDDPM_CHECK(spec.size >= 1, ConfigError, "dataset.size: must be positive");
    ESDDPM_CHECK(spec.noise >= 0.0 && std::isfinite(spec.noise), ConfigError, "dataset.noise: must be >= 0");
    if (spec.kind == DatasetKind::gaussian_ring || spec.kind == DatasetKind::class_ring) {
        ESDDPM_CHECK(spec.modes >= 1, ConfigError, "dataset.modes: must be positive");
        ESDDPM_CHECK(spec.radius > 0.0, ConfigError, "dataset.radius: must be positive");
    }
}

}  // namespace

const char* to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::two_moons: return "two_moons";
        case DatasetKind::gaussian_ring: return "gaussian_ring";
        case DatasetKind::swiss_roll: return "swiss_roll";
        case DatasetKind::class_ring: return "class_ring";
        case DatasetKind::raster_patterns: return "raster_patterns";
    }
    return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
    for (auto k : {DatasetKind::two_moons, DatasetKind::gaussian_ring, DatasetKind::swiss_roll,
                   DatasetKind::class_ring, DatasetKind::raster_patterns}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("dataset.kind: unknown dataset '" + std::string(name) + "'");
}

int dataset_dim(DatasetKind kind) { return kind == DatasetKind::raster_patterns ? kRasterSide * kRasterSide : 2; }

bool dataset_labeled(DatasetKind kind) { return kind == DatasetKind::class_ring; }

Vector raster_glyph(int g) {
    ESDDPM_CHECK(g >= 0 && g < kRasterGlyphCount, IndexOutOfRange, "glyph index out of range");
    Vector v(kRasterSide * kRasterSide);
    for (int i = 0; i < v.size(); ++i) {
        v[i] = kGlyphs[static_cast<std::size_t>(g)][i] == '#' ? 1.0 : -1.0;
    }
    return v;
}

Vector ring_center(int k, int modes, double radius) {
    const double angle = 2.0 * std::numbers::pi * k / modes;
    Vector c(2);
    c << radius * std::cos(angle), radius * std::sin(angle);
    return c;
}

Dataset make_dataset(const DatasetSpec& spec) {
    check_spec(spec);
    Rng rng = stream_rng(spec.seed, 0xda7a);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out;
    out.data.resize(dataset_dim(spec.kind), spec.size);
    switch (spec.kind) {
        case DatasetKind::two_moons: {
            for (int i = 0; i < spec.size; ++i) {
                const double theta = std::numbers::pi * uniform01(rng);
                const bool upper = uniform01(rng) < 0.5;
                double x = upper ? std::cos(theta) : 1.0 - std::cos(theta);
                double y = upper ? std::sin(theta) : 0.5 - std::sin(theta);
                x += spec.noise * normal(rng) - 0.5;
                y += spec.noise * normal(rng) - 0.25;
                out.data.col(i) << x, y;
            }
            break;
        }
        case DatasetKind::gaussian_ring:
        case DatasetKind::class_ring: {
            std::uniform_int_distribution<int> pick(0, spec.modes - 1);
            const bool labeled = spec.kind == DatasetKind::class_ring;
            for (int i = 0; i < spec.size; ++i) {
                const int k = pick(rng);
                out.data.col(i) = ring_center(k, spec.modes, spec.radius);
                out.data(0, i) += spec.noise * normal(rng);
                out.data(1, i) += spec.noise * normal(rng);
                if (labeled) {
                    out.labels.push_back(k);
                }
            }
            break;
        }
        case DatasetKind::swiss_roll: {
            for (int i = 0; i < spec.size; ++i) {
                const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * uniform01(rng));
                out.data(0, i) = t * std::cos(t) / 5.0 + spec.noise * normal(rng);
                out.data(1, i) = t * std::sin(t) / 5.0 + spec.noise * normal(rng);
            }
            break;
        }
        case DatasetKind::raster_patterns: {
            std::uniform_int_distribution<int> pick(0, kRasterGlyphCount - 1);
            for (int i = 0; i < spec.size; ++i) {
                out.data.col(i) = raster_glyph(pick(rng)) + spec.noise * standard_normal(rng, out.data.rows());
            }
            break;
        }
    }
    return out;
}

}  // namespace esddpm
