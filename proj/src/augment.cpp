#include "dronenet/augment.hpp"

#include <algorithm>

#include "dronenet/ops.hpp"

namespace dronenet {

std::vector<Point> flip_points(std::span<const Point> points, std::size_t width) {
    const double last = static_cast<double>(width) - 1.0;
    std::vector<Point> out;
    out.reserve(points.size());
    for (const Point& p : points) {
        out.push_back({last - p.x, p.y});
    }
    return out;
}

Augmented augment(const Tensor<float>& image, std::span<const Point> points, const AugmentConfig& config, Rng& rng) {
    Augmented out{image, std::vector<Point>(points.begin(), points.end())};
    if (!config.enabled()) {
        return out;
    }
    if (config.flip && rng.bernoulli(config.flip_probability)) {
        out.image = flip_horizontal(out.image);
        out.points = flip_points(points, image.shape().w);
    }
    if (!config.brightness && !config.contrast) {
        return out;
    }
    const double shift = config.brightness ? rng.uniform(-config.brightness_delta, config.brightness_delta) : 0.0;
    const double gain = config.contrast ? rng.uniform(config.contrast_min, config.contrast_max) : 1.0;
    double mean = 0.0;
    for (float v : out.image.data()) {
        mean += v;
    }
    mean /= static_cast<double>(std::max<std::size_t>(1, out.image.size()));
    for (auto& v : out.image.data()) {
        const double shifted = v + shift;
        const double scaled = (shifted - (mean + shift)) * gain + (mean + shift);
        v = static_cast<float>(std::clamp(scaled, -1.0, 1.0));
    }
    return out;
}

} // namespace dronenet
