#include "dronenet/loss.hpp"

#include "dronenet/errors.hpp"

namespace dronenet {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    if (pred.shape() != gt.shape()) {
        throw ShapeError("mse_loss: prediction " + pred.shape().str() + " and target " + gt.shape().str() +
                         " differ in shape");
    }
    const std::size_t batch = pred.shape().n;
    if (batch == 0) {
        throw ShapeError("mse_loss: empty batch");
    }
    LossResult<T> r{0.0, Tensor<T>(pred.shape())};
    const double inv_n = 1.0 / static_cast<double>(batch);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
        acc += d * d;
        r.grad[i] = static_cast<T>(2.0 * d * inv_n);
    }
    r.loss = acc * inv_n;
    return r;
}

template LossResult<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss(const Tensor<double>&, const Tensor<double>&);

} // namespace dronenet
