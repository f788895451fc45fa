#pragma once

// Independent reference implementations used as test oracles. They share nothing with the
// library kernels beyond the Tensor container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "dronenet/conv.hpp"
#include "dronenet/density_map.hpp"
#include "dronenet/rng.hpp"
#include "dronenet/tensor.hpp"

namespace dronenet::testing {

/// Zero-pads every plane by p on all four sides.
template <typename T>
Tensor<T> pad_zero(const Tensor<T>& x, std::size_t p) {
    const Shape& s = x.shape();
    Tensor<T> y(Shape{s.n, s.c, s.h + 2 * p, s.w + 2 * p});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < s.h; ++i)
                for (std::size_t j = 0; j < s.w; ++j)
                    y(n, c, i + p, j + p) = x(n, c, i, j);
    return y;
}

/// Naive 7-nested-loop cross-correlation over an explicitly padded input.
template <typename T>
Tensor<T> brute_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t padding,
                     std::size_t stride = 1) {
    const Tensor<T> xp = pad_zero(x, padding);
    const Shape& ps = xp.shape();
    const Shape& ws = w.shape();
    const std::size_t oh = (ps.h - ws.h) / stride + 1;
    const std::size_t ow = (ps.w - ws.w) / stride + 1;
    Tensor<T> y(Shape{ps.n, ws.n, oh, ow});
    for (std::size_t n = 0; n < ps.n; ++n)
        for (std::size_t o = 0; o < ws.n; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    T acc = b[o];
                    for (std::size_t c = 0; c < ws.c; ++c)
                        for (std::size_t u = 0; u < ws.h; ++u)
                            for (std::size_t v = 0; v < ws.w; ++v)
                                acc += w(o, c, u, v) * xp(n, c, i * stride + u, j * stride + v);
                    y(n, o, i, j) = acc;
                }
    return y;
}

/// x^q by a loop of q multiplications starting from 1.
template <typename T>
Tensor<T> loop_pow(const Tensor<T>& x, int q) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        T v = T{1};
        for (int k = 0; k < q; ++k) v *= x[i];
        y[i] = v;
    }
    return y;
}

/// Self-ONN layer by definition: b + sum_q brute_conv(W_q, x^q).
template <typename T>
Tensor<T> brute_selfonn(const Tensor<T>& x, const std::vector<Tensor<T>>& banks, const Tensor<T>& b,
                        std::size_t padding) {
    Tensor<T> y = brute_conv(x, banks[0], b, padding);
    const Tensor<T> zero(b.shape());
    for (std::size_t q = 1; q < banks.size(); ++q) {
        const Tensor<T> t = brute_conv(loop_pow(x, static_cast<int>(q + 1)), banks[q], zero, padding);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += t[i];
    }
    return y;
}

/// 2x2 max by scanning each window, first maximum in row-major order wins.
template <typename T>
Tensor<T> scan_maxpool(const Tensor<T>& x, std::vector<std::size_t>* winners = nullptr) {
    const Shape& s = x.shape();
    const std::size_t oh = (s.h + 1) / 2;
    const std::size_t ow = (s.w + 1) / 2;
    Tensor<T> y(Shape{s.n, s.c, oh, ow});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t at = 0;
                    for (std::size_t k = 0; k < 4; ++k) {
                        const std::size_t r = std::min(2 * i + k / 2, s.h - 1);
                        const std::size_t col = std::min(2 * j + k % 2, s.w - 1);
                        if (x(n, c, r, col) > best) {
                            best = x(n, c, r, col);
                            at = x.index(n, c, r, col);
                        }
                    }
                    y(n, c, i, j) = best;
                    if (winners) winners->push_back(at);
                }
    return y;
}

/// Block sums with zero padding.
template <typename T>
Tensor<T> loop_sum_pool(const Tensor<T>& x, std::size_t f) {
    const Shape& s = x.shape();
    Tensor<T> y(Shape{s.n, s.c, (s.h + f - 1) / f, (s.w + f - 1) / f});
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t i = 0; i < s.h; ++i)
                for (std::size_t j = 0; j < s.w; ++j)
                    y(n, c, i / f, j / f) += x(n, c, i, j);
    return y;
}

/// Central difference of a scalar function with respect to *slot.
inline double central_diff(const std::function<double()>& f, double* slot, double h = 1e-5) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = f();
    *slot = saved - h;
    const double down = f();
    *slot = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Counting scalar: every multiplication increments a global counter.
struct CountingScalar {
    double v = 0.0;
    static inline std::uint64_t multiplies = 0;
    friend CountingScalar operator*(CountingScalar a, CountingScalar b) {
        ++multiplies;
        return {a.v * b.v};
    }
    friend CountingScalar operator+(CountingScalar a, CountingScalar b) { return {a.v + b.v}; }
    CountingScalar& operator+=(CountingScalar o) {
        v += o.v;
        return *this;
    }
};

/// Runs a same-padded q-power convolution layer on an h x w input with counting scalars and
/// returns the number of weight-times-input multiplies (padded taps included, powers excluded).
inline std::uint64_t instrumented_layer_macs(std::size_t h, std::size_t w, std::size_t cin, std::size_t cout,
                                             std::size_t k, int q) {
    const std::size_t p = k / 2;
    std::vector<CountingScalar> x((h + 2 * p) * (w + 2 * p) * cin, CountingScalar{0.5});
    std::vector<CountingScalar> wt(k * k * cin * cout, CountingScalar{0.25});
    CountingScalar::multiplies = 0;
    for (int qq = 1; qq <= q; ++qq) {
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    CountingScalar acc{0.0};
                    for (std::size_t c = 0; c < cin; ++c)
                        for (std::size_t u = 0; u < k; ++u)
                            for (std::size_t v = 0; v < k; ++v)
                                acc += wt[((o * cin + c) * k + u) * k + v] *
                                       x[(c * (h + 2 * p) + i + u) * (w + 2 * p) + j + v];
                }
    }
    return CountingScalar::multiplies;
}

/// Windowed SSIM computed independently: explicit Gaussian window, per-window means and
/// (co)variances by direct sums, constants K1 = 0.01, K2 = 0.03 on range L.
inline double window_ssim(const DensityMap& a, const DensityMap& b, double L) {
    const std::size_t win = std::min<std::size_t>({11, a.height, a.width});
    std::vector<double> g(win * win);
    double gs = 0.0;
    const double mid = (static_cast<double>(win) - 1.0) / 2.0;
    for (std::size_t u = 0; u < win; ++u)
        for (std::size_t v = 0; v < win; ++v) {
            const double du = static_cast<double>(u) - mid;
            const double dv = static_cast<double>(v) - mid;
            g[u * win + v] = std::exp(-(du * du + dv * dv) / (2.0 * 1.5 * 1.5));
            gs += g[u * win + v];
        }
    for (double& v : g) v /= gs;
    const double c1 = (0.01 * L) * (0.01 * L);
    const double c2 = (0.03 * L) * (0.03 * L);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + win <= a.height; ++i)
        for (std::size_t j = 0; j + win <= a.width; ++j) {
            double ma = 0, mb = 0;
            for (std::size_t u = 0; u < win; ++u)
                for (std::size_t v = 0; v < win; ++v) {
                    ma += g[u * win + v] * a.at(i + u, j + v);
                    mb += g[u * win + v] * b.at(i + u, j + v);
                }
            double va = 0, vb = 0, cov = 0;
            for (std::size_t u = 0; u < win; ++u)
                for (std::size_t v = 0; v < win; ++v) {
                    const double da = a.at(i + u, j + v) - ma;
                    const double db = b.at(i + u, j + v) - mb;
                    va += g[u * win + v] * da * da;
                    vb += g[u * win + v] * db * db;
                    cov += g[u * win + v] * da * db;
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

/// Textbook Adam on a single scalar, all in double.
struct ScalarAdam {
    double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-3;
    double m = 0, v = 0;
    int t = 0;
    double step(double p, double g) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return p - lr * mh / (std::sqrt(vh) + eps);
    }
};

// ---------------------------------------------------------------------------
// Hand-rolled generators for property tests.

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(s);
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

inline std::size_t random_between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

} // namespace dronenet::testing
