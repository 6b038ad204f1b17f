// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "esddpm/types.hpp"

namespace esddpm {

enum class DatasetKind { two_moons, gaussian_ring, swiss_roll, class_ring, raster_patterns };

const char* to_string(DatasetKind kind);
/// Throws ConfigError for unknown names.
DatasetKind parse_dataset_kind(std::string_view name);

inline constexpr int kRasterSide = 8;
inline constexpr int kRasterGlyphCount = 6;

struct DatasetSpec {
    DatasetKind kind = DatasetKind::two_moons;
    int size = 1000;
    double noise = 0.05;
    std::uint64_t seed = 0;
    int modes = 8;        // ring kinds only
    double radius = 2.0;  // ring kinds only
};

struct Dataset {
    SampleSet data;
    Labels labels;  // non-empty iff the kind is labeled
};

int dataset_dim(DatasetKind kind);
bool dataset_labeled(DatasetKind kind);

/// Deterministic in the spec (including its seed).
Dataset make_dataset(const DatasetSpec& spec);

/// Noise-free glyph g in [-1, 1], row-major 8x8.
Vector raster_glyph(int g);

/// Center of mode k of a ring dataset.
Vector ring_center(int k, int modes, double radius);

}  // namespace esddpm
