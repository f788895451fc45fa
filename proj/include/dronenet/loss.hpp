#pragma once

#include "dronenet/tensor.hpp"

namespace dronenet {

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad; ///< d loss / d pred
};

/// Pixel-wise Euclidean loss: (1/N) sum_i ||pred_i - gt_i||^2 over the batch dimension N,
/// with gradient 2 (pred - gt) / N.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& gt);

} // namespace dronenet
