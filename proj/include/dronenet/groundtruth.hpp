#pragma once

#include <span>
#include <string>
#include <vector>

#include "dronenet/density_map.hpp"

namespace dronenet {

/// Sub-pixel position in image pixel units, origin top-left; pixel (r, c) is centred at (c, r).
struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Dot annotations for one image.
struct DotAnnotation {
    std::string file;
    std::vector<Point> points;

    [[nodiscard]] std::size_t count() const noexcept { return points.size(); }

    friend bool operator==(const DotAnnotation&, const DotAnnotation&) = default;
};

/// Default kernel width for drone-view imagery; 15 is used for ShanghaiTech-B / CARPK style data.
inline constexpr double kDefaultSigma = 7.0;

/// Pixel a point is deposited at. Points up to one image extent outside the frame are
/// clamped to the border; farther points throw DataError.
struct PixelIndex {
    std::size_t row;
    std::size_t col;
};
PixelIndex nearest_pixel(const Point& p, std::size_t height, std::size_t width);

/// Sum of unit-mass Gaussians (std sigma) centred on each point's nearest pixel. Each kernel
/// is truncated to a (2*ceil(4 sigma)+1)^2 window and renormalized after clipping to the image,
/// so every point contributes exactly 1 to the total.
DensityMap generate_density_map(std::span<const Point> points, std::size_t height, std::size_t width, double sigma);

inline DensityMap generate_density_map(const DotAnnotation& ann, std::size_t height, std::size_t width, double sigma) {
    return generate_density_map(ann.points, height, width, sigma);
}

/// Block-sum downsampling to the network's output resolution; conserves the count.
DensityMap downsample_gt(const DensityMap& map, std::size_t factor = 4);

} // namespace dronenet
