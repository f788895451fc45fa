#include "dronenet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dronenet/errors.hpp"

namespace dronenet {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape " + a.shape().str() + " does not match " + b.shape().str());
    }
}

} // namespace

template <typename T>
Tensor<T> elementwise_pow(const Tensor<T>& x, int q) {
    if (q < 1) {
        throw std::invalid_argument("elementwise_pow: exponent must be >= 1, got " + std::to_string(q));
    }
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const T base = x[i];
        T acc = base;
        for (int k = 1; k < q; ++k) {
            acc *= base;
        }
        y[i] = acc;
    }
    return y;
}

template <typename T>
PoolResult<T> maxpool2x2_forward(const Tensor<T>& x) {
    const Shape& s = x.shape();
    if (s.h == 0 || s.w == 0) {
        throw ShapeError("maxpool2x2: empty spatial extent " + s.str());
    }
    const Shape os{s.n, s.c, (s.h + 1) / 2, (s.w + 1) / 2};
    PoolResult<T> r{Tensor<T>(os), PoolIndices{s, os, std::vector<std::uint8_t>(os.size())}};
    std::size_t k = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const T* in = x.plane(n, c);
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j, ++k) {
                    T best{};
                    std::uint8_t arg = 0;
                    for (std::uint8_t t = 0; t < 4; ++t) {
                        const std::size_t hi = std::min(2 * i + t / 2, s.h - 1);
                        const std::size_t wi = std::min(2 * j + t % 2, s.w - 1);
                        const T v = in[hi * s.w + wi];
                        if (t == 0 || v > best) {
                            best = v;
                            arg = t;
                        }
                    }
                    r.output[k] = best;
                    r.indices.argmax[k] = arg;
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& grad_out, const PoolIndices& indices) {
    if (grad_out.shape() != indices.output) {
        throw ShapeError("maxpool2x2_backward: gradient shape " + grad_out.shape().str() + " does not match " +
                         indices.output.str());
    }
    const Shape& s = indices.input;
    const Shape& os = indices.output;
    Tensor<T> gx(s);
    std::size_t k = 0;
    for (std::size_t n = 0; n < os.n; ++n) {
        for (std::size_t c = 0; c < os.c; ++c) {
            T* g = gx.plane(n, c);
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j, ++k) {
                    const std::uint8_t t = indices.argmax[k];
                    const std::size_t hi = std::min(2 * i + t / 2, s.h - 1);
                    const std::size_t wi = std::min(2 * j + t % 2, s.w - 1);
                    g[hi * s.w + wi] += grad_out[k];
                }
            }
        }
    }
    return gx;
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data()) {
        v = std::tanh(v);
    }
    return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
    require_same_shape(y, grad_out, "tanh_backward");
    Tensor<T> g(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        g[i] = grad_out[i] * (T{1} - y[i] * y[i]);
    }
    return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data()) {
        v = v > T{0} ? v : T{0};
    }
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor<T> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = x[i] > T{0} ? grad_out[i] : T{0};
    }
    return g;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> xs) {
    if (xs.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    const Shape& first = xs.front().shape();
    std::size_t channels = 0;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels: shape " + s.str() + " incompatible with " + first.str());
        }
        channels += s.c;
    }
    Tensor<T> out(Shape{first.n, channels, first.h, first.w});
    const std::size_t plane = first.plane();
    for (std::size_t n = 0; n < first.n; ++n) {
        T* dst = out.plane(n, 0);
        for (const auto& x : xs) {
            const std::size_t count = x.shape().c * plane;
            std::copy_n(x.plane(n, 0), count, dst);
            dst += count;
        }
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::span<const std::size_t> channels) {
    const Shape& s = x.shape();
    std::size_t total = 0;
    for (std::size_t c : channels) {
        total += c;
    }
    if (total != s.c) {
        throw ShapeError("split_channels: parts sum to " + std::to_string(total) + " channels, tensor has " +
                         std::to_string(s.c));
    }
    std::vector<Tensor<T>> parts;
    parts.reserve(channels.size());
    for (std::size_t c : channels) {
        parts.emplace_back(Shape{s.n, c, s.h, s.w});
    }
    const std::size_t plane = s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
        const T* src = x.plane(n, 0);
        for (auto& part : parts) {
            const std::size_t count = part.shape().c * plane;
            std::copy_n(src, count, part.plane(n, 0));
            src += count;
        }
    }
    return parts;
}

template <typename T>
Tensor<T> sum_pool(const Tensor<T>& x, std::size_t factor) {
    if (factor == 0) {
        throw std::invalid_argument("sum_pool: factor must be positive");
    }
    const Shape& s = x.shape();
    const Shape os{s.n, s.c, (s.h + factor - 1) / factor, (s.w + factor - 1) / factor};
    Tensor<T> out(os);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const T* in = x.plane(n, c);
            T* o = out.plane(n, c);
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j) {
                    T acc{0};
                    for (std::size_t u = i * factor; u < std::min(s.h, (i + 1) * factor); ++u) {
                        for (std::size_t v = j * factor; v < std::min(s.w, (j + 1) * factor); ++v) {
                            acc += in[u * s.w + v];
                        }
                    }
                    o[i * os.w + j] = acc;
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& x) {
    const Shape& s = x.shape();
    Tensor<T> out(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < s.h; ++i) {
                const T* src = x.plane(n, c) + i * s.w;
                T* dst = out.plane(n, c) + i * s.w;
                std::reverse_copy(src, src + s.w, dst);
            }
        }
    }
    return out;
}

#define DRONENET_INSTANTIATE_OPS(T)                                                            \
    template Tensor<T> elementwise_pow(const Tensor<T>&, int);                                 \
    template PoolResult<T> maxpool2x2_forward(const Tensor<T>&);                               \
    template Tensor<T> maxpool2x2_backward(const Tensor<T>&, const PoolIndices&);              \
    template Tensor<T> tanh_forward(const Tensor<T>&);                                         \
    template Tensor<T> tanh_backward(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> relu_forward(const Tensor<T>&);                                         \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> concat_channels(std::span<const Tensor<T>>);                            \
    template std::vector<Tensor<T>> split_channels(const Tensor<T>&, std::span<const std::size_t>); \
    template Tensor<T> sum_pool(const Tensor<T>&, std::size_t);                                \
    template Tensor<T> flip_horizontal(const Tensor<T>&);

DRONENET_INSTANTIATE_OPS(float)
DRONENET_INSTANTIATE_OPS(double)

#undef DRONENET_INSTANTIATE_OPS

} // namespace dronenet
