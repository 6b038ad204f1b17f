// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#include "esddpm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "esddpm/csv.hpp"
#include "esddpm/errors.hpp"

namespace esddpm {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
constexpr double kCanvas = 480.0;
constexpr double kMargin = 20.0;

}  // namespace

std::string scatter_svg(const std::vector<SampleSet>& sets) {
    double lo_x = 0.0, hi_x = 0.0, lo_y = 0.0, hi_y = 0.0;
    bool any = false;
    for (const auto& s : sets) {
        ESDDPM_CHECK(s.rows() == 2, DimensionMismatch, "scatter plot needs 2-D samples");
        if (s.cols() == 0) {
            continue;
        }
        const double sx0 = s.row(0).minCoeff(), sx1 = s.row(0).maxCoeff();
        const double sy0 = s.row(1).minCoeff(), sy1 = s.row(1).maxCoeff();
        if (!any) {
            lo_x = sx0; hi_x = sx1; lo_y = sy0; hi_y = sy1;
            any = true;
        } else {
            lo_x = std::min(lo_x, sx0); hi_x = std::max(hi_x, sx1);
            lo_y = std::min(lo_y, sy0); hi_y = std::max(hi_y, sy1);
        }
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    const double scale = (kCanvas - 2.0 * kMargin) / span;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCanvas << "\" height=\"" << kCanvas
        << "\" viewBox=\"0 0 " << kCanvas << ' ' << kCanvas << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << kCanvas << "\" height=\"" << kCanvas << "\" fill=\"white\"/>\n";
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const char* color = kPalette[k % std::size(kPalette)];
        svg << "<g fill=\"" << color << "\" fill-opacity=\"0.6\">\n";
        for (Eigen::Index i = 0; i < sets[k].cols(); ++i) {
            const double px = kMargin + (sets[k](0, i) - lo_x) * scale;
            const double py = kCanvas - kMargin - (sets[k](1, i) - lo_y) * scale;
            svg << "<circle cx=\"" << format_real(std::round(px * 100.0) / 100.0) << "\" cy=\""
                << format_real(std::round(py * 100.0) / 100.0) << "\" r=\"1.5\"/>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string raster_montage_pgm(const SampleSet& rasters, int side) {
    ESDDPM_CHECK(side >= 1 && rasters.rows() == static_cast<Eigen::Index>(side) * side, DimensionMismatch,
                 "raster montage needs side*side rows");
    const auto k = static_cast<int>(rasters.cols());
    const int per_row = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k)))));
    const int tile_rows = k == 0 ? 0 : (k + per_row - 1) / per_row;
    const int width = std::max(1, per_row * (side + 1) - 1);
    const int height = std::max(1, tile_rows * (side + 1) - 1);
    std::string pixels(static_cast<std::size_t>(width) * height, static_cast<char>(0));
    for (int t = 0; t < k; ++t) {
        const int ox = (t % per_row) * (side + 1);
        const int oy = (t / per_row) * (side + 1);
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                const double v = std::clamp(rasters(r * side + c, t), -1.0, 1.0);
                const auto level = static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
                pixels[static_cast<std::size_t>(oy + r) * width + ox + c] = static_cast<char>(level);
            }
        }
    }
    std::ostringstream pgm;
    pgm << "P5\n# tiles " << k << "\n" << width << ' ' << height << "\n255\n" << pixels;
    return pgm.str();
}

void emit_plot(const std::vector<SampleSet>& sets, const std::string& path) {
    std::string content;
    const bool raster = !sets.empty() && sets.front().rows() != 2;
    if (raster) {
        Eigen::Index total = 0;
        for (const auto& s : sets) {
            ESDDPM_CHECK(s.rows() == sets.front().rows(), DimensionMismatch, "plot sets differ in dimension");
            total += s.cols();
        }
        SampleSet all(sets.front().rows(), total);
        Eigen::Index at = 0;
        for (const auto& s : sets) {
            all.middleCols(at, s.cols()) = s;
            at += s.cols();
        }
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(all.rows()))));
        content = raster_montage_pgm(all, side);
    } else {
        content = scatter_svg(sets);
    }
    std::ofstream out(path, std::ios::binary);
    ESDDPM_CHECK(out.good(), Error, "cannot open '" + path + "' for writing");
    out << content;
}

}  // namespace esddpm
