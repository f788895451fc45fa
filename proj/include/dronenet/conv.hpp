#pragma once

#include <cstddef>

#include "dronenet/tensor.hpp"

namespace dronenet {

/// Geometry of a 2-D cross-correlation. DroneNet only uses stride 1.
struct ConvSpec {
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t padding = 0;
    std::size_t stride = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;

    /// Square kernel with "same" padding (odd kernel sizes only).
    static ConvSpec same(std::size_t kernel, std::size_t in_channels, std::size_t out_channels);

    /// Throws ShapeError unless (extent + 2*padding - kernel) is a non-negative multiple of stride.
    [[nodiscard]] std::size_t out_h(std::size_t in_h) const;
    [[nodiscard]] std::size_t out_w(std::size_t in_w) const;

    [[nodiscard]] Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
    [[nodiscard]] Shape bias_shape() const { return {1, out_channels, 1, 1}; }
    [[nodiscard]] Shape output_shape(const Shape& input) const;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

enum class ConvAlgo {
    Auto,   ///< Direct for double, Gemm for float.
    Direct, ///< Naive nested loops; the reference.
    Gemm,   ///< Patch-matrix (im2col) reformulation on top of a GEMM.
};

template <typename T>
struct ConvGrads {
    Tensor<T> grad_x;
    Tensor<T> grad_w;
    Tensor<T> grad_b;
};

/// out[n,o,i,j] = b[o] + sum_{c,u,v} w[o,c,u,v] * x_padded[n,c,i*s+u,j*s+v]
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec,
                         ConvAlgo algo = ConvAlgo::Auto);

/// Analytic gradients of conv2d_forward with respect to x, w and b.
/// When need_grad_x is false the returned grad_x is empty.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, const Tensor<T>& grad_out,
                             ConvAlgo algo = ConvAlgo::Auto, bool need_grad_x = true);

} // namespace dronenet
