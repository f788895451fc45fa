#pragma once

#include <cstdint>

#include "dronenet/model.hpp"

namespace dronenet {

struct BenchmarkResult {
    std::size_t warmup = 0;
    std::size_t runs = 0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double min_ms = 0.0;
    double total_seconds = 0.0;
    double fps = 0.0;
};

inline constexpr const char* kBenchWarmupEnv = "DRONENET_BENCH_WARMUP";
inline constexpr const char* kBenchRunsEnv = "DRONENET_BENCH_RUNS";

/// Times single-threaded model_forward on a constant input of the given shape. The
/// environment variables above, when set, replace warmup and runs. Zero timed runs is rejected.
template <typename T>
BenchmarkResult benchmark(const DroneNet<T>& model, const Shape& input, std::size_t warmup, std::size_t runs);

struct Footprint {
    std::size_t size_bytes = 0;
    double gmacs = 0.0;
};

inline constexpr std::size_t kReferenceHeight = 512;
inline constexpr std::size_t kReferenceWidth = 640;

/// Serialized model length and GMACs at the 512x640 reference input.
template <typename T>
Footprint model_footprint(const DroneNet<T>& model);

} // namespace dronenet
