#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dronenet/tensor.hpp"

namespace dronenet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators mirroring the parameter list.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(AdamConfig c) : config(c) {}
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Moment buffers are allocated on the first call; afterwards their shapes must match.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state, double lr);

} // namespace dronenet
