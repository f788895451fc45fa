#include "dronenet/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronenet/macs.hpp"
#include "dronenet/model_io.hpp"

namespace dronenet {
namespace {

std::size_t env_count(const char* name, std::size_t fallback) {
    const char* raw = std::getenv(name);
    if (raw == nullptr || *raw == '\0') {
        return fallback;
    }
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (*end != '\0' || raw[0] == '-') {
        throw std::invalid_argument(std::string(name) + " must be a non-negative integer, got '" + raw + "'");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

template <typename T>
BenchmarkResult benchmark(const DroneNet<T>& model, const Shape& input, std::size_t warmup, std::size_t runs) {
    warmup = env_count(kBenchWarmupEnv, warmup);
    runs = env_count(kBenchRunsEnv, runs);
    if (runs == 0) {
        throw std::invalid_argument("benchmark: at least one timed run is required");
    }
    const Tensor<T> x(input, T(0.25));
    ExecOptions opts;
    opts.threads = 1;
    for (std::size_t i = 0; i < warmup; ++i) {
        (void)model_forward(model, x, nullptr, opts);
    }
    std::vector<double> ms;
    ms.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)model_forward(model, x, nullptr, opts);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    BenchmarkResult r;
    r.warmup = warmup;
    r.runs = runs;
    double total = 0.0;
    for (double v : ms) {
        total += v;
    }
    r.mean_ms = total / static_cast<double>(runs);
    double var = 0.0;
    for (double v : ms) {
        var += (v - r.mean_ms) * (v - r.mean_ms);
    }
    r.std_ms = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
    r.min_ms = *std::min_element(ms.begin(), ms.end());
    r.total_seconds = total / 1000.0;
    r.fps = static_cast<double>(runs) / r.total_seconds;
    return r;
}

template <typename T>
Footprint model_footprint(const DroneNet<T>& model) {
    return {serialize_model(model).size(), count_macs(model, kReferenceHeight, kReferenceWidth).gmacs()};
}

template BenchmarkResult benchmark(const DroneNet<float>&, const Shape&, std::size_t, std::size_t);
template BenchmarkResult benchmark(const DroneNet<double>&, const Shape&, std::size_t, std::size_t);
template Footprint model_footprint(const DroneNet<float>&);
template Footprint model_footprint(const DroneNet<double>&);

} // namespace dronenet
