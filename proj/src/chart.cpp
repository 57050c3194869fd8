#include "unicast/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace unicast {

namespace {

constexpr int kMargin = 2;

void stamp(RasterImage& img, int x, int y, int thickness) {
    const int lo = -(thickness - 1) / 2;
    const int hi = thickness / 2;
    for (int dy = lo; dy <= hi; ++dy) {
        for (int dx = lo; dx <= hi; ++dx) {
            const int px = x + dx, py = y + dy;
            if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
            img.pixels[static_cast<size_t>(py) * img.width + px] = 1.0;
        }
    }
}

void draw_segment(RasterImage& img, int x0, int y0, int x1, int y1, int thickness) {
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int x = x0, y = y0;
    while (true) {
        stamp(img, x, y, thickness);
        if (x == x1 && y == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

} // namespace

RasterImage render_series(const std::vector<double>& values, int width, int height,
                          int line_thickness) {
    if (values.size() < 2) {
        throw input_error("render_series: need at least 2 points, got " +
                          std::to_string(values.size()));
    }
    if (width < 16 || height < 16) {
        throw config_error("render_series: image must be at least 16x16, got " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
    if (line_thickness < 1) throw config_error("render_series: thickness must be >= 1");

    RasterImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<size_t>(width) * height, 0.0);

    double vmin = values[0], vmax = values[0];
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const double range = vmax - vmin;
    const int n = static_cast<int>(values.size());
    const double x_span = width - 1 - 2 * kMargin;
    const double y_span = height - 1 - 2 * kMargin;

    std::vector<int> xs(values.size()), ys(values.size());
    for (int i = 0; i < n; ++i) {
        xs[static_cast<size_t>(i)] =
            kMargin + static_cast<int>(std::lround(x_span * i / (n - 1)));
        if (range > 0.0) {
            const double t = (values[static_cast<size_t>(i)] - vmin) / range;
            ys[static_cast<size_t>(i)] =
                kMargin + static_cast<int>(std::lround(y_span * (1.0 - t)));
        } else {
            ys[static_cast<size_t>(i)] = height / 2;
        }
    }
    for (int i = 0; i + 1 < n; ++i) {
        draw_segment(img, xs[static_cast<size_t>(i)], ys[static_cast<size_t>(i)],
                     xs[static_cast<size_t>(i + 1)], ys[static_cast<size_t>(i + 1)],
                     line_thickness);
    }
    return img;
}

void write_pgm(const RasterImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("write_pgm: cannot open " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (double p : img.pixels) {
        const double clamped = std::clamp(p, 0.0, 1.0);
        out.put(static_cast<char>(static_cast<uint8_t>(std::lround(clamped * 255.0))));
    }
    if (!out) throw input_error("write_pgm: write failed for " + path);
}

} // namespace unicast
