#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dronenet/annotations.hpp"
#include "dronenet/density_map.hpp"
#include "dronenet/rng.hpp"
#include "dronenet/tensor.hpp"

namespace dronenet {

inline constexpr std::uint64_t kSplitStream = 0x5011;

/// One training/evaluation image, normalized to [-1, 1], with its dot annotations.
struct Sample {
    std::string id;
    Tensor<float> image; ///< [1, C, H, W]
    std::vector<Point> points;
};

/// Loads every annotated image under images_dir; paths in the annotation file are relative to it.
/// Throws DataError naming the first missing or unreadable image.
std::vector<Sample> load_dataset(const std::filesystem::path& annotations, const std::filesystem::path& images_dir);

/// Full-resolution density map from the sample's points, sum-pooled by factor.
DensityMap sample_ground_truth(const Sample& sample, double sigma, std::size_t factor = 4);

/// Deterministic shuffled split; round(fraction * n) items go to the second (validation) part.
template <typename Item>
std::pair<std::vector<Item>, std::vector<Item>> split_dataset(const std::vector<Item>& items, double fraction,
                                                              std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0, 1), got " + std::to_string(fraction));
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, kSplitStream));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto val_count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size())));
    std::pair<std::vector<Item>, std::vector<Item>> parts;
    for (std::size_t k = 0; k < order.size(); ++k) {
        auto& dst = k < order.size() - val_count ? parts.first : parts.second;
        dst.push_back(items[order[k]]);
    }
    return parts;
}

} // namespace dronenet
