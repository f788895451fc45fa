#include "dronenet/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "dronenet/errors.hpp"

namespace dronenet {

template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, AdamState<T>& state, double lr) {
    if (!(lr > 0.0)) {
        throw std::invalid_argument("adam_step: learning rate must be positive");
    }
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (state.m.empty()) {
        for (const Tensor<T>* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k]->shape() != grads[k].shape() || state.m[k].shape() != grads[k].shape()) {
            throw ShapeError("adam_step: tensor " + std::to_string(k) + " has parameter " + params[k]->shape().str() +
                             ", gradient " + grads[k].shape().str() + ", state " + state.m[k].shape().str());
        }
    }

    ++state.step;
    const AdamConfig& c = state.config;
    const auto t = static_cast<double>(state.step);
    const double m_corr = 1.0 - std::pow(c.beta1, t);
    const double v_corr = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        const Tensor<T>& g = grads[k];
        Tensor<T>& m = state.m[k];
        Tensor<T>& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double m_hat = mi / m_corr;
            const double v_hat = vi / v_corr;
            p[i] = static_cast<T>(p[i] - lr * m_hat / (std::sqrt(v_hat) + c.epsilon));
        }
    }
}

template void adam_step(std::span<Tensor<float>* const>, std::span<const Tensor<float>>, AdamState<float>&, double);
template void adam_step(std::span<Tensor<double>* const>, std::span<const Tensor<double>>, AdamState<double>&,
                        double);

} // namespace dronenet
