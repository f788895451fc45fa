#pragma once

#include <vector>

#include "dronenet/conv.hpp"
#include "dronenet/tensor.hpp"

namespace dronenet {

/// Self-organized operational layer (generative neuron):
///
///     y = b + sum_{q=1..q_max} conv(W_q, x^q)
///
/// With q_max == 1 this is exactly a convolution layer.
template <typename T>
struct SelfOnnLayer {
    ConvSpec spec;
    int q_max = 1;
    std::vector<Tensor<T>> weights; ///< q_max banks, each [C_out, C_in, K_h, K_w]
    Tensor<T> bias;                 ///< [1, C_out, 1, 1], applied once

    /// Zero-initialized layer; throws std::invalid_argument if q_max < 1.
    static SelfOnnLayer zeros(const ConvSpec& spec, int q_max);

    /// Throws ShapeError when banks or bias disagree with spec.
    void validate() const;

    [[nodiscard]] std::size_t parameter_count() const;
};

template <typename T>
struct SelfOnnGrads {
    Tensor<T> grad_x; ///< empty when not requested
    std::vector<Tensor<T>> grad_w;
    Tensor<T> grad_b;
};

template <typename T>
Tensor<T> selfonn_forward(const SelfOnnLayer<T>& layer, const Tensor<T>& x, ConvAlgo algo = ConvAlgo::Auto);

/// grad_W_q = dconv/dW(x^q, g);  grad_x = sum_q q * x^(q-1) * dconv/dx(W_q, g).
template <typename T>
SelfOnnGrads<T> selfonn_backward(const SelfOnnLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out,
                                 ConvAlgo algo = ConvAlgo::Auto, bool need_grad_x = true);

} // namespace dronenet
