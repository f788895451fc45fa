#include "dronenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dronenet/errors.hpp"

namespace dronenet {
namespace {

void require_same_shape(const DensityMap& a, const DensityMap& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError(std::string(what) + ": map shapes differ (" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                         ")");
    }
}

std::vector<double> gaussian_window(std::size_t k, double sigma) {
    std::vector<double> g(k);
    const double c = (static_cast<double>(k) - 1.0) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = static_cast<double>(i) - c;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[i];
    }
    for (auto& v : g) {
        v /= total;
    }
    return g;
}

} // namespace

double mae(std::span<const CountPair> pairs) {
    if (pairs.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& p : pairs) {
        total += std::abs(p.estimate - p.truth);
    }
    return total / static_cast<double>(pairs.size());
}

double game(const DensityMap& pred, const DensityMap& gt, std::size_t grid) {
    require_same_shape(pred, gt, "game");
    if (grid == 0) {
        throw std::invalid_argument("game: grid must be positive");
    }
    const std::size_t h = gt.height;
    const std::size_t w = gt.width;
    double total = 0.0;
    for (std::size_t gi = 0; gi < grid; ++gi) {
        const std::size_t r0 = gi * h / grid;
        const std::size_t r1 = (gi + 1) * h / grid;
        for (std::size_t gj = 0; gj < grid; ++gj) {
            const std::size_t c0 = gj * w / grid;
            const std::size_t c1 = (gj + 1) * w / grid;
            double diff = 0.0;
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) {
                    diff += static_cast<double>(pred.at(r, c)) - static_cast<double>(gt.at(r, c));
                }
            }
            total += std::abs(diff);
        }
    }
    return total;
}

double game(std::span<const MapPair> maps, std::size_t grid) {
    if (maps.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& m : maps) {
        total += game(m.pred, m.gt, grid);
    }
    return total / static_cast<double>(maps.size());
}

double ssim(const DensityMap& pred, const DensityMap& gt) {
    require_same_shape(pred, gt, "ssim");
    if (gt.values.empty()) {
        throw ShapeError("ssim: empty maps");
    }
    const std::size_t k = std::min<std::size_t>({11, gt.height, gt.width});
    const auto g = gaussian_window(k, 1.5);
    double range = std::max(static_cast<double>(pred.max()) - pred.min(), static_cast<double>(gt.max()) - gt.min());
    if (!(range > 0.0)) {
        range = 1.0;
    }
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t i = 0; i + k <= gt.height; ++i) {
        for (std::size_t j = 0; j + k <= gt.width; ++j) {
            double mx = 0.0;
            double my = 0.0;
            for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                    const double wt = g[u] * g[v];
                    mx += wt * pred.at(i + u, j + v);
                    my += wt * gt.at(i + u, j + v);
                }
            }
            double sxx = 0.0;
            double syy = 0.0;
            double sxy = 0.0;
            for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                    const double wt = g[u] * g[v];
                    const double dx = pred.at(i + u, j + v) - mx;
                    const double dy = gt.at(i + u, j + v) - my;
                    sxx += wt * (dx * dx);
                    syy += wt * (dy * dy);
                    sxy += wt * (dx * dy);
                }
            }
            const double num = (2.0 * (mx * my) + c1) * (2.0 * sxy + c2);
            const double den = (mx * mx + my * my + c1) * (sxx + syy + c2);
            total += num / den;
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

double psnr(const DensityMap& pred, const DensityMap& gt) {
    require_same_shape(pred, gt, "psnr");
    if (gt.values.empty()) {
        throw ShapeError("psnr: empty maps");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        const double d = static_cast<double>(pred.values[i]) - gt.values[i];
        mse += d * d;
    }
    mse /= static_cast<double>(gt.values.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    double peak = gt.max();
    if (!(peak > 0.0)) {
        peak = pred.max();
    }
    return 10.0 * std::log10(peak * peak / mse);
}

double finite_mean(std::span<const double> values) {
    double total = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            total += v;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::infinity() : total / static_cast<double>(n);
}

} // namespace dronenet
