// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "esddpm/types.hpp"

namespace esddpm {

/// 2-D sets become an SVG scatter (one color per set); 64-D sets become a PGM
/// montage of 8x8 tiles. Output is a deterministic function of the inputs.
void emit_plot(const std::vector<SampleSet>& sets, const std::string& path);

std::string scatter_svg(const std::vector<SampleSet>& sets);

/// Binary PGM, tiles laid out row-major with a 1-pixel gutter.
std::string raster_montage_pgm(const SampleSet& rasters, int side = 8);

}  // namespace esddpm
