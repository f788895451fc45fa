#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dronenet/model.hpp"

namespace dronenet {

/// Binary model format (all integers little-endian u32, weights IEEE-754 binary32):
///
///   "SONN" | version=1 | layer count
///   per layer: kind (1 Self-ONN, 2 conv) | column | flags (bit 0: pool after)
///              | q_max | kernel_h | kernel_w | padding | stride | in_channels | out_channels
///              | q_max weight banks [C_out, C_in, K_h, K_w] | bias [C_out]
///   CRC-32 of every preceding byte
///
/// Self-ONN records appear column by column in layer order; the fusion conv is last.
inline constexpr std::uint32_t kModelFormatVersion = 1;

template <typename T>
std::vector<std::uint8_t> serialize_model(const DroneNet<T>& model);

/// Throws DataError with a description of the first problem found.
DroneNet<float> deserialize_model(std::span<const std::uint8_t> bytes);

template <typename T>
void save_model(const DroneNet<T>& model, const std::filesystem::path& path);

DroneNet<float> load_model(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

} // namespace dronenet
