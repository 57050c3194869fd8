#pragma once

#include <string>
#include <vector>

#include "unicast/errors.hpp"

namespace unicast {

// Single-channel raster, row-major, values in [0,1]. Row 0 is the top.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    double at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Rasterizes a series as a bare polyline: min-max scaled into the vertical
// plot region (constant series maps to the center row), evenly spaced x
// positions, Bresenham segments stamped at the given thickness, foreground
// 1.0 on background 0.0. No axes or ticks; the shape is the whole signal.
// Min-max scaling makes the output invariant under v -> a*v + b for a > 0.
RasterImage render_series(const std::vector<double>& values, int width = 64, int height = 64,
                          int line_thickness = 1);

// Binary PGM (P5) export for eyeballing rendered charts.
void write_pgm(const RasterImage& img, const std::string& path);

} // namespace unicast
