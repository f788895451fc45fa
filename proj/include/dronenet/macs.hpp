#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dronenet/model.hpp"

namespace dronenet {

struct LayerMacs {
    std::string name;
    std::size_t in_h = 0, in_w = 0;
    std::size_t out_h = 0, out_w = 0;
    std::size_t in_channels = 0, out_channels = 0;
    std::size_t kernel = 0;
    int q = 1;
    /// q * H_out * W_out * C_out * C_in * K^2 (padded taps included)
    std::uint64_t macs = 0;
    /// q (q - 1) / 2 multiplies per input element for raising x to each power; not part of macs.
    std::uint64_t power_multiplies = 0;
};

struct MacReport {
    std::vector<LayerMacs> layers;
    std::uint64_t total_macs = 0;
    std::uint64_t total_power_multiplies = 0;

    [[nodiscard]] double gmacs() const { return static_cast<double>(total_macs) / 1e9; }
};

/// Per-layer multiply-accumulate counts for one forward pass on a single input_h x input_w image.
MacReport count_macs(const DroneNetConfig& config, std::size_t input_h, std::size_t input_w);

template <typename T>
MacReport count_macs(const DroneNet<T>& model, std::size_t input_h, std::size_t input_w) {
    return count_macs(model.config(), input_h, input_w);
}

} // namespace dronenet
