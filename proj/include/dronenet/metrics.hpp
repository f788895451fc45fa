#pragma once

#include <span>
#include <vector>

#include "dronenet/density_map.hpp"

namespace dronenet {

struct CountPair {
    double estimate = 0.0;
    double truth = 0.0;
};

struct MapPair {
    DensityMap pred;
    DensityMap gt;
};

/// Mean absolute count error; 0 for an empty list.
double mae(std::span<const CountPair> pairs);

/// Sum over grid x grid cells of |cell sum(pred) - cell sum(gt)|. Cell boundaries are
/// floor(i * extent / grid), so every pixel belongs to exactly one cell.
double game(const DensityMap& pred, const DensityMap& gt, std::size_t grid = 4);
double game(std::span<const MapPair> maps, std::size_t grid = 4);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows; the window shrinks to the
/// smaller map extent when needed. L is the larger dynamic range of the two maps (1 if both
/// are constant).
double ssim(const DensityMap& pred, const DensityMap& gt);

/// 10 log10(MAX^2 / MSE), MAX = max(gt) (max(pred) when gt is all zero). Returns +inf when
/// the maps are equal.
double psnr(const DensityMap& pred, const DensityMap& gt);

/// Mean of the finite values; +inf if there are none.
double finite_mean(std::span<const double> values);

} // namespace dronenet
