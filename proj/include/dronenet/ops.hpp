#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dronenet/tensor.hpp"

namespace dronenet {

/// x[i]^q by repeated multiplication; q must be >= 1.
template <typename T>
Tensor<T> elementwise_pow(const Tensor<T>& x, int q);

/// Winner of each 2x2 window as a window-local index (0..3, row-major).
struct PoolIndices {
    Shape input;
    Shape output;
    std::vector<std::uint8_t> argmax;
};

template <typename T>
struct PoolResult {
    Tensor<T> output;
    PoolIndices indices;
};

/// Non-overlapping 2x2 max pooling. Odd extents are padded by replicating the last
/// row/column; ties resolve to the lowest row-major position in the window.
template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& grad_out, const PoolIndices& indices);

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x);

/// Uses the forward output y: grad_x = grad_y * (1 - y^2).
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// Uses the forward input x; the gradient at x == 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out);

/// Channel concatenation in argument order. All inputs must share N, H and W.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs);

/// Inverse of concat_channels.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> channels);

/// Non-overlapping factor x factor block sums. Extents that are not a multiple of the
/// factor are zero-padded on the bottom/right, so the total is conserved.
template <typename T>
Tensor<T> sum_pool(const Tensor<T>& x, std::size_t factor);

/// Mirror along the width axis.
template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& x);

} // namespace dronenet
