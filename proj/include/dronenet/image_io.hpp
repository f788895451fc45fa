#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dronenet/tensor.hpp"

namespace dronenet {

/// Decodes binary PGM (P5, 1 channel) or PPM (P6, 3 channels) with maxval <= 255 into a
/// [1, C, H, W] tensor holding 0..255 intensities.
Tensor<float> load_image(const std::filesystem::path& path);
Tensor<float> decode_image(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

/// [0, 255] -> [-1, 1], same affine map on every channel.
template <typename T>
Tensor<T> normalize_image(const Tensor<T>& x);

/// Writes channel 0 (C == 1, P5) or channels 0..2 (C == 3, P6) of batch item 0, rounding and
/// clamping to 0..255.
void write_image(const Tensor<float>& x, const std::filesystem::path& path);

} // namespace dronenet
