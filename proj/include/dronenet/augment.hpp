#pragma once

#include <span>
#include <vector>

#include "dronenet/groundtruth.hpp"
#include "dronenet/rng.hpp"
#include "dronenet/tensor.hpp"

namespace dronenet {

/// Photometric ranges are in normalized [-1, 1] units.
struct AugmentConfig {
    bool flip = true;
    bool brightness = true;
    bool contrast = true;
    double flip_probability = 0.5;
    double brightness_delta = 0.1; ///< shift drawn from [-delta, delta]
    double contrast_min = 0.8;
    double contrast_max = 1.2;

    [[nodiscard]] bool enabled() const noexcept { return flip || brightness || contrast; }
    static AugmentConfig none() { return {false, false, false}; }
};

struct Augmented {
    Tensor<float> image;
    std::vector<Point> points;
};

/// x -> W - 1 - x for every point.
std::vector<Point> flip_points(std::span<const Point> points, std::size_t width);

/// Random horizontal flip (image and points), brightness shift, and contrast scaling about the
/// image mean, clamped to [-1, 1]. Deterministic given the generator state.
Augmented augment(const Tensor<float>& image, std::span<const Point> points, const AugmentConfig& config, Rng& rng);

} // namespace dronenet
