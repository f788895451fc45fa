#include "dronenet/selfonn.hpp"

#include <algorithm>
#include <stdexcept>
#include <type_traits>

#include "dronenet/errors.hpp"
#include "dronenet/ops.hpp"

namespace dronenet {

namespace {

template <typename T>
bool use_direct(ConvAlgo algo) {
    return algo == ConvAlgo::Direct || (algo == ConvAlgo::Auto && std::is_same_v<T, double>);
}

// [x, x^2, ..., x^q] along the channel axis.
template <typename T>
Tensor<T> stack_powers(const Tensor<T>& x, int q_max) {
    const Shape& s = x.shape();
    Tensor<T> out(Shape{s.n, s.c * static_cast<std::size_t>(q_max), s.h, s.w});
    const std::size_t block = s.c * s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
        const T* src = x.plane(n, 0);
        T* base = out.plane(n, 0);
        std::copy_n(src, block, base);
        for (int q = 1; q < q_max; ++q) {
            const T* prev = base + static_cast<std::size_t>(q - 1) * block;
            T* cur = base + static_cast<std::size_t>(q) * block;
            for (std::size_t i = 0; i < block; ++i) {
                cur[i] = prev[i] * src[i];
            }
        }
    }
    return out;
}

// W_stack[o, (q-1)*C_in + c, u, v] = W_q[o, c, u, v]
template <typename T>
Tensor<T> stack_weights(const SelfOnnLayer<T>& layer) {
    const Shape ws = layer.spec.weight_shape();
    const auto q_max = static_cast<std::size_t>(layer.q_max);
    Tensor<T> out(Shape{ws.n, ws.c * q_max, ws.h, ws.w});
    const std::size_t block = ws.c * ws.h * ws.w;
    for (std::size_t o = 0; o < ws.n; ++o) {
        for (std::size_t q = 0; q < q_max; ++q) {
            std::copy_n(layer.weights[q].ptr() + o * block, block, out.ptr() + (o * q_max + q) * block);
        }
    }
    return out;
}

template <typename T>
ConvSpec stacked_spec(const SelfOnnLayer<T>& layer) {
    ConvSpec s = layer.spec;
    s.in_channels *= static_cast<std::size_t>(layer.q_max);
    return s;
}

} // namespace

template <typename T>
SelfOnnLayer<T> SelfOnnLayer<T>::zeros(const ConvSpec& spec, int q_max) {
    if (q_max < 1) {
        throw std::invalid_argument("Self-ONN layer requires q_max >= 1, got " + std::to_string(q_max));
    }
    SelfOnnLayer layer;
    layer.spec = spec;
    layer.q_max = q_max;
    layer.weights.assign(static_cast<std::size_t>(q_max), Tensor<T>(spec.weight_shape()));
    layer.bias = Tensor<T>(spec.bias_shape());
    return layer;
}

template <typename T>
void SelfOnnLayer<T>::validate() const {
    if (q_max < 1 || weights.size() != static_cast<std::size_t>(q_max)) {
        throw ShapeError("Self-ONN layer has " + std::to_string(weights.size()) + " weight banks for q_max " +
                         std::to_string(q_max));
    }
    for (const auto& w : weights) {
        if (w.shape() != spec.weight_shape()) {
            throw ShapeError("Self-ONN weight bank shape " + w.shape().str() + " does not match " +
                             spec.weight_shape().str());
        }
    }
    if (bias.shape() != spec.bias_shape()) {
        throw ShapeError("Self-ONN bias shape " + bias.shape().str() + " does not match " + spec.bias_shape().str());
    }
}

template <typename T>
std::size_t SelfOnnLayer<T>::parameter_count() const {
    return static_cast<std::size_t>(q_max) * spec.weight_shape().size() + spec.out_channels;
}

template <typename T>
Tensor<T> selfonn_forward(const SelfOnnLayer<T>& layer, const Tensor<T>& x, ConvAlgo algo) {
    layer.validate();
    if (x.shape().c != layer.spec.in_channels) {
        throw ShapeError("Self-ONN input has " + std::to_string(x.shape().c) + " channels, layer expects " +
                         std::to_string(layer.spec.in_channels));
    }
    if (layer.q_max == 1) {
        return conv2d_forward(x, layer.weights[0], layer.bias, layer.spec, algo);
    }
    if (!use_direct<T>(algo)) {
        return conv2d_forward(stack_powers(x, layer.q_max), stack_weights(layer), layer.bias, stacked_spec(layer),
                              algo);
    }
    Tensor<T> y = conv2d_forward(x, layer.weights[0], layer.bias, layer.spec, algo);
    const Tensor<T> zero_bias(layer.spec.bias_shape());
    for (int q = 2; q <= layer.q_max; ++q) {
        const Tensor<T> term =
            conv2d_forward(elementwise_pow(x, q), layer.weights[static_cast<std::size_t>(q - 1)], zero_bias, layer.spec,
                           algo);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += term[i];
        }
    }
    return y;
}

template <typename T>
SelfOnnGrads<T> selfonn_backward(const SelfOnnLayer<T>& layer, const Tensor<T>& x, const Tensor<T>& grad_out,
                                 ConvAlgo algo, bool need_grad_x) {
    layer.validate();
    if (x.shape().c != layer.spec.in_channels) {
        throw ShapeError("Self-ONN input has " + std::to_string(x.shape().c) + " channels, layer expects " +
                         std::to_string(layer.spec.in_channels));
    }
    const auto q_max = static_cast<std::size_t>(layer.q_max);
    SelfOnnGrads<T> g;
    if (q_max == 1) {
        auto c = conv2d_backward(x, layer.weights[0], layer.spec, grad_out, algo, need_grad_x);
        g.grad_x = std::move(c.grad_x);
        g.grad_w.push_back(std::move(c.grad_w));
        g.grad_b = std::move(c.grad_b);
        return g;
    }

    if (!use_direct<T>(algo)) {
        const Tensor<T> stacked = stack_powers(x, layer.q_max);
        auto c = conv2d_backward(stacked, stack_weights(layer), stacked_spec(layer), grad_out, algo, need_grad_x);
        const Shape ws = layer.spec.weight_shape();
        const std::size_t block = ws.c * ws.h * ws.w;
        g.grad_w.assign(q_max, Tensor<T>(ws));
        for (std::size_t o = 0; o < ws.n; ++o) {
            for (std::size_t q = 0; q < q_max; ++q) {
                std::copy_n(c.grad_w.ptr() + (o * q_max + q) * block, block, g.grad_w[q].ptr() + o * block);
            }
        }
        g.grad_b = std::move(c.grad_b);
        if (need_grad_x) {
            const Shape& s = x.shape();
            const std::size_t xblock = s.c * s.plane();
            g.grad_x = Tensor<T>(s);
            for (std::size_t n = 0; n < s.n; ++n) {
                const T* xs = x.plane(n, 0);
                const T* gs = c.grad_x.plane(n, 0);
                T* gx = g.grad_x.plane(n, 0);
                for (std::size_t i = 0; i < xblock; ++i) {
                    // sum_q q * x^(q-1) * g_q
                    T power{1};
                    T acc{0};
                    for (std::size_t q = 0; q < q_max; ++q) {
                        acc += static_cast<T>(q + 1) * power * gs[q * xblock + i];
                        power *= xs[i];
                    }
                    gx[i] = acc;
                }
            }
        }
        return g;
    }

    g.grad_w.reserve(q_max);
    if (need_grad_x) {
        g.grad_x = Tensor<T>(x.shape());
    }
    Tensor<T> power_below(x.shape(), T{1}); // x^(q-1)
    Tensor<T> power = x;                    // x^q
    for (std::size_t q = 1; q <= q_max; ++q) {
        auto c = conv2d_backward(power, layer.weights[q - 1], layer.spec, grad_out, algo, need_grad_x);
        if (need_grad_x) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                g.grad_x[i] += static_cast<T>(q) * power_below[i] * c.grad_x[i];
            }
        }
        g.grad_w.push_back(std::move(c.grad_w));
        if (q == 1) {
            g.grad_b = std::move(c.grad_b);
        }
        power_below = power;
        power = elementwise_pow(x, static_cast<int>(q + 1));
    }
    return g;
}

template struct SelfOnnLayer<float>;
template struct SelfOnnLayer<double>;
template Tensor<float> selfonn_forward(const SelfOnnLayer<float>&, const Tensor<float>&, ConvAlgo);
template Tensor<double> selfonn_forward(const SelfOnnLayer<double>&, const Tensor<double>&, ConvAlgo);
template SelfOnnGrads<float> selfonn_backward(const SelfOnnLayer<float>&, const Tensor<float>&, const Tensor<float>&,
                                              ConvAlgo, bool);
template SelfOnnGrads<double> selfonn_backward(const SelfOnnLayer<double>&, const Tensor<double>&,
                                               const Tensor<double>&, ConvAlgo, bool);

} // namespace dronenet
