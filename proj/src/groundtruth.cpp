#include "dronenet/groundtruth.hpp"

#include <cmath>
#include <sstream>

#include "dronenet/errors.hpp"
#include "dronenet/ops.hpp"

namespace dronenet {

namespace {

std::size_t clamp_axis(double v, std::size_t extent, const char* axis, const Point& p) {
    const auto e = static_cast<double>(extent);
    if (!std::isfinite(v) || v < -e || v >= 2.0 * e) {
        std::ostringstream msg;
        msg << "annotation point (" << p.x << ", " << p.y << ") lies too far outside the image along " << axis
            << " (extent " << extent << ")";
        throw DataError(msg.str());
    }
    const double r = std::round(v);
    if (r <= 0.0) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(r), extent - 1);
}

} // namespace

PixelIndex nearest_pixel(const Point& p, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) {
        throw ShapeError("density map must have positive extents");
    }
    return {clamp_axis(p.y, height, "y", p), clamp_axis(p.x, width, "x", p)};
}

DensityMap generate_density_map(std::span<const Point> points, std::size_t height, std::size_t width, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("density map sigma must be positive, got " + std::to_string(sigma));
    }
    if (height == 0 || width == 0) {
        throw ShapeError("density map must have positive extents");
    }
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const auto d = static_cast<double>(k);
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    }

    std::vector<double> acc(height * width, 0.0);
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto w = static_cast<std::ptrdiff_t>(width);
    for (const Point& p : points) {
        const PixelIndex px = nearest_pixel(p, height, width);
        const auto r0 = static_cast<std::ptrdiff_t>(px.row);
        const auto c0 = static_cast<std::ptrdiff_t>(px.col);
        const std::ptrdiff_t r_lo = std::max<std::ptrdiff_t>(-radius, -r0);
        const std::ptrdiff_t r_hi = std::min<std::ptrdiff_t>(radius, h - 1 - r0);
        const std::ptrdiff_t c_lo = std::max<std::ptrdiff_t>(-radius, -c0);
        const std::ptrdiff_t c_hi = std::min<std::ptrdiff_t>(radius, w - 1 - c0);
        // separable kernel: normalizing each axis over its in-image taps normalizes the product
        double row_mass = 0.0;
        for (std::ptrdiff_t k = r_lo; k <= r_hi; ++k) {
            row_mass += kernel[static_cast<std::size_t>(k + radius)];
        }
        double col_mass = 0.0;
        for (std::ptrdiff_t k = c_lo; k <= c_hi; ++k) {
            col_mass += kernel[static_cast<std::size_t>(k + radius)];
        }
        const double norm = 1.0 / (row_mass * col_mass);
        for (std::ptrdiff_t dr = r_lo; dr <= r_hi; ++dr) {
            const double gr = kernel[static_cast<std::size_t>(dr + radius)] * norm;
            double* row = acc.data() + static_cast<std::size_t>(r0 + dr) * width;
            for (std::ptrdiff_t dc = c_lo; dc <= c_hi; ++dc) {
                row[c0 + dc] += gr * kernel[static_cast<std::size_t>(dc + radius)];
            }
        }
    }

    DensityMap map(height, width, MapScale::Full);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        map.values[i] = static_cast<float>(acc[i]);
    }
    return map;
}

DensityMap downsample_gt(const DensityMap& map, std::size_t factor) {
    const Tensor<double> pooled = sum_pool(to_tensor<double>(map), factor);
    DensityMap out = to_density_map(pooled, 0, factor == 1 ? map.scale : MapScale::Output);
    return out;
}

} // namespace dronenet
