#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dronenet/conv.hpp"
#include "dronenet/model.hpp"

namespace dronenet {

struct GradCheckOptions {
    DroneNetConfig config = DroneNetConfig::tiny();
    std::size_t height = 8;
    std::size_t width = 8;
    double step = 1e-5;
    double tolerance = 1e-5;
    /// Denominator floor for the relative error, multiplied by max(1, |loss|). Central
    /// differences at h = 1e-5 carry about 2e-11 * |loss| of round-off, so gradients below the
    /// floor are effectively compared at tolerance * floor absolute.
    double floor = 1e-5;
    std::uint64_t seed = 1;
    std::size_t max_checks_per_tensor = 0; ///< 0 checks every element
    bool check_input = true;
    bool corrupt_bias_grad = false; ///< fault injection: adds 1 to the fusion bias gradient
    ConvAlgo algo = ConvAlgo::Auto;
};

struct GradCheckEntry {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::string label;
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Compares analytic gradients of the MSE loss against central differences on a
/// randomly initialized 64-bit model. Relative error is
/// |a - n| / max(|a|, |n|, floor * max(1, |loss|)).
GradCheckReport gradient_check(const GradCheckOptions& options);

/// The configurations exercised by the gradcheck command: the tiny model (q = 3 then 5)
/// and its q = 1 counterpart.
std::vector<std::pair<std::string, DroneNetConfig>> gradcheck_suite();

} // namespace dronenet
