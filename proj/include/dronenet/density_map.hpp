#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dronenet/tensor.hpp"

namespace dronenet {

enum class MapScale : std::uint8_t { Full, Output };

/// Single-channel non-negative field whose integral is the object count.
struct DensityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;
    MapScale scale = MapScale::Full;

    DensityMap() = default;
    DensityMap(std::size_t h, std::size_t w, MapScale s = MapScale::Full) : height(h), width(w), values(h * w), scale(s) {}

    float& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
    [[nodiscard]] float at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
    [[nodiscard]] double sum() const;
    [[nodiscard]] float max() const;
    [[nodiscard]] float min() const;

    friend bool operator==(const DensityMap&, const DensityMap&) = default;
};

/// [1, 1, H, W] tensor view of a map.
template <typename T>
Tensor<T> to_tensor(const DensityMap& map);

/// Channel 0 of batch item n.
template <typename T>
DensityMap to_density_map(const Tensor<T>& x, std::size_t n = 0, MapScale scale = MapScale::Output);

/// "DMAP" | u32 h | u32 w | u32 reserved | h*w little-endian binary32 values.
std::vector<std::uint8_t> encode_dmap(const DensityMap& map);
DensityMap decode_dmap(const std::vector<std::uint8_t>& bytes);
void write_dmap(const DensityMap& map, const std::filesystem::path& path);
DensityMap read_dmap(const std::filesystem::path& path);

/// One row per map row, comma separated.
void write_dmap_csv(const DensityMap& map, const std::filesystem::path& path);

} // namespace dronenet
