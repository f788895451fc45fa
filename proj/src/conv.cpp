#include "dronenet/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <memory>
#include <type_traits>
#include <vector>

#include "dronenet/errors.hpp"

namespace dronenet {

namespace {

std::size_t out_extent(std::size_t in, std::size_t kernel, std::size_t padding, std::size_t stride, const char* axis) {
    if (stride == 0) {
        throw ShapeError("convolution stride must be positive");
    }
    const std::size_t padded = in + 2 * padding;
    if (padded < kernel) {
        throw ShapeError(std::string("convolution kernel larger than padded input along ") + axis + ": " +
                         std::to_string(kernel) + " > " + std::to_string(padded));
    }
    if ((padded - kernel) % stride != 0) {
        throw ShapeError(std::string("convolution output extent along ") + axis + " is not integral");
    }
    return (padded - kernel) / stride + 1;
}

template <typename T>
void check_operands(const Shape& x, const Tensor<T>& w, const ConvSpec& spec) {
    if (spec.kernel_h == 0 || spec.kernel_w == 0 || spec.in_channels == 0 || spec.out_channels == 0) {
        throw ShapeError("convolution spec has a zero extent");
    }
    if (x.c != spec.in_channels) {
        throw ShapeError("convolution input has " + std::to_string(x.c) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
    }
    if (w.shape() != spec.weight_shape()) {
        throw ShapeError("convolution weight shape " + w.shape().str() + " does not match spec " +
                         spec.weight_shape().str());
    }
}

template <typename T>
ConvAlgo resolve(ConvAlgo algo) {
    if (algo != ConvAlgo::Auto) {
        return algo;
    }
    return std::is_same_v<T, double> ? ConvAlgo::Direct : ConvAlgo::Gemm;
}

// Valid output column range [lo, hi) for kernel tap v: lo*s + v - p >= 0 and hi*s + v - p >= in_w.
struct Span {
    std::size_t lo;
    std::size_t hi;
};

Span valid_range(std::size_t tap, std::size_t padding, std::size_t stride, std::size_t in, std::size_t out) {
    const auto first_at_least = [&](std::ptrdiff_t bound) -> std::size_t {
        // smallest j >= 0 with j*stride + tap - padding >= bound
        const std::ptrdiff_t need = bound + static_cast<std::ptrdiff_t>(padding) - static_cast<std::ptrdiff_t>(tap);
        if (need <= 0) {
            return 0;
        }
        const auto s = static_cast<std::ptrdiff_t>(stride);
        return static_cast<std::size_t>((need + s - 1) / s);
    };
    const std::size_t lo = std::min(first_at_least(0), out);
    const std::size_t hi = std::min(first_at_least(static_cast<std::ptrdiff_t>(in)), out);
    return {lo, std::max(lo, hi)};
}

// ---------------------------------------------------------------------------
// Direct reference

template <typename T>
Tensor<T> forward_direct(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec) {
    const Shape& xs = x.shape();
    const Shape os = spec.output_shape(xs);
    Tensor<T> y(os);
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    const auto in_h = static_cast<std::ptrdiff_t>(xs.h);
    const auto in_w = static_cast<std::ptrdiff_t>(xs.w);
    for (std::size_t n = 0; n < os.n; ++n) {
        for (std::size_t o = 0; o < os.c; ++o) {
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j) {
                    T acc = b[o];
                    const auto top = static_cast<std::ptrdiff_t>(i * spec.stride) - pad;
                    const auto left = static_cast<std::ptrdiff_t>(j * spec.stride) - pad;
                    for (std::size_t c = 0; c < xs.c; ++c) {
                        for (std::size_t u = 0; u < spec.kernel_h; ++u) {
                            const auto ih = top + static_cast<std::ptrdiff_t>(u);
                            if (ih < 0 || ih >= in_h) {
                                continue;
                            }
                            for (std::size_t v = 0; v < spec.kernel_w; ++v) {
                                const auto iw = left + static_cast<std::ptrdiff_t>(v);
                                if (iw < 0 || iw >= in_w) {
                                    continue;
                                }
                                acc += w(o, c, u, v) * x(n, c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
                            }
                        }
                    }
                    y(n, o, i, j) = acc;
                }
            }
        }
    }
    return y;
}

template <typename T>
ConvGrads<T> backward_direct(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, const Tensor<T>& grad_out,
                             bool need_grad_x) {
    const Shape& xs = x.shape();
    const Shape& os = grad_out.shape();
    ConvGrads<T> g{need_grad_x ? Tensor<T>(xs) : Tensor<T>{}, Tensor<T>(w.shape()), Tensor<T>(spec.bias_shape())};
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    const auto in_h = static_cast<std::ptrdiff_t>(xs.h);
    const auto in_w = static_cast<std::ptrdiff_t>(xs.w);
    for (std::size_t n = 0; n < os.n; ++n) {
        for (std::size_t o = 0; o < os.c; ++o) {
            for (std::size_t i = 0; i < os.h; ++i) {
                for (std::size_t j = 0; j < os.w; ++j) {
                    const T go = grad_out(n, o, i, j);
                    g.grad_b[o] += go;
                    const auto top = static_cast<std::ptrdiff_t>(i * spec.stride) - pad;
                    const auto left = static_cast<std::ptrdiff_t>(j * spec.stride) - pad;
                    for (std::size_t c = 0; c < xs.c; ++c) {
                        for (std::size_t u = 0; u < spec.kernel_h; ++u) {
                            const auto ih = top + static_cast<std::ptrdiff_t>(u);
                            if (ih < 0 || ih >= in_h) {
                                continue;
                            }
                            for (std::size_t v = 0; v < spec.kernel_w; ++v) {
                                const auto iw = left + static_cast<std::ptrdiff_t>(v);
                                if (iw < 0 || iw >= in_w) {
                                    continue;
                                }
                                const auto uh = static_cast<std::size_t>(ih);
                                const auto uw = static_cast<std::size_t>(iw);
                                g.grad_w(o, c, u, v) += x(n, c, uh, uw) * go;
                                if (need_grad_x) {
                                    g.grad_x(n, c, uh, uw) += w(o, c, u, v) * go;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Patch-matrix path. Output rows are processed in bands so the patch buffer stays bounded.

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;

constexpr std::size_t kPatchBudget = std::size_t{1} << 23; // elements

struct Band {
    std::size_t row0;
    std::size_t rows;
};

std::size_t rows_per_band(std::size_t kdim, std::size_t out_h, std::size_t out_w) {
    const std::size_t per_row = std::max<std::size_t>(1, kdim * out_w);
    return std::clamp<std::size_t>(kPatchBudget / per_row, 1, out_h);
}

// col[(c*kh + u)*kw + v][(i - row0)*out_w + j] = x_padded[c, i*s + u, j*s + v]
template <typename T>
void im2col(const T* x, const Shape& xs, const ConvSpec& spec, std::size_t out_w, Band band, T* col) {
    const std::size_t pixels = band.rows * out_w;
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    for (std::size_t c = 0; c < xs.c; ++c) {
        const T* xc = x + c * xs.h * xs.w;
        for (std::size_t u = 0; u < spec.kernel_h; ++u) {
            for (std::size_t v = 0; v < spec.kernel_w; ++v) {
                T* row = col + ((c * spec.kernel_h + u) * spec.kernel_w + v) * pixels;
                const Span cols = valid_range(v, spec.padding, spec.stride, xs.w, out_w);
                for (std::size_t r = 0; r < band.rows; ++r) {
                    T* dst = row + r * out_w;
                    const auto ih = static_cast<std::ptrdiff_t>((band.row0 + r) * spec.stride + u) - pad;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(xs.h)) {
                        std::fill(dst, dst + out_w, T{0});
                        continue;
                    }
                    const T* src = xc + static_cast<std::size_t>(ih) * xs.w;
                    std::fill(dst, dst + cols.lo, T{0});
                    if (spec.stride == 1) {
                        std::copy(src + cols.lo + v - spec.padding, src + cols.hi + v - spec.padding, dst + cols.lo);
                    } else {
                        for (std::size_t j = cols.lo; j < cols.hi; ++j) {
                            dst[j] = src[j * spec.stride + v - spec.padding];
                        }
                    }
                    std::fill(dst + cols.hi, dst + out_w, T{0});
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const Shape& xs, const ConvSpec& spec, std::size_t out_w, Band band, T* x) {
    const std::size_t pixels = band.rows * out_w;
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    for (std::size_t c = 0; c < xs.c; ++c) {
        T* xc = x + c * xs.h * xs.w;
        for (std::size_t u = 0; u < spec.kernel_h; ++u) {
            for (std::size_t v = 0; v < spec.kernel_w; ++v) {
                const T* row = col + ((c * spec.kernel_h + u) * spec.kernel_w + v) * pixels;
                const Span cols = valid_range(v, spec.padding, spec.stride, xs.w, out_w);
                for (std::size_t r = 0; r < band.rows; ++r) {
                    const auto ih = static_cast<std::ptrdiff_t>((band.row0 + r) * spec.stride + u) - pad;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(xs.h)) {
                        continue;
                    }
                    const T* src = row + r * out_w;
                    T* dst = xc + static_cast<std::size_t>(ih) * xs.w;
                    if (spec.stride == 1) {
                        T* d = dst + v - spec.padding;
                        for (std::size_t j = cols.lo; j < cols.hi; ++j) {
                            d[j] += src[j];
                        }
                    } else {
                        for (std::size_t j = cols.lo; j < cols.hi; ++j) {
                            dst[j * spec.stride + v - spec.padding] += src[j];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> forward_gemm(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec) {
    const Shape& xs = x.shape();
    const Shape os = spec.output_shape(xs);
    Tensor<T> y(os);
    const std::size_t kdim = spec.in_channels * spec.kernel_h * spec.kernel_w;
    const std::size_t band_rows = rows_per_band(kdim, os.h, os.w);
    const auto col = std::make_unique_for_overwrite<T[]>(kdim * band_rows * os.w);
    const auto out_ch = static_cast<Eigen::Index>(os.c);
    const Eigen::Map<const RowMat<T>> wm(w.ptr(), out_ch, static_cast<Eigen::Index>(kdim));
    for (std::size_t n = 0; n < xs.n; ++n) {
        for (std::size_t row0 = 0; row0 < os.h; row0 += band_rows) {
            const Band band{row0, std::min(band_rows, os.h - row0)};
            const auto pixels = static_cast<Eigen::Index>(band.rows * os.w);
            im2col(x.plane(n, 0), xs, spec, os.w, band, col.get());
            const Eigen::Map<const RowMat<T>> cm(col.get(), static_cast<Eigen::Index>(kdim), pixels);
            Eigen::Map<RowMat<T>, 0, Strided> ym(y.plane(n, 0) + row0 * os.w, out_ch, pixels,
                                                  Strided(static_cast<Eigen::Index>(os.plane())));
            ym.noalias() = wm * cm;
            ym.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.ptr(), out_ch);
        }
    }
    return y;
}

// For stride 1, grad_x is the correlation of grad_out with the spatially flipped,
// channel-transposed kernel. Its GEMM has Cin rows instead of a Cin*k*k x pixels scatter,
// which pays off once Cin is at least Cout.
bool transposed_grad_applies(const ConvSpec& spec) {
    return spec.stride == 1 && spec.kernel_h == spec.kernel_w && spec.padding < spec.kernel_h &&
           spec.in_channels >= spec.out_channels;
}

template <typename T>
Tensor<T> grad_input_transposed(const Tensor<T>& w, const ConvSpec& spec, const Tensor<T>& grad_out) {
    const std::size_t kh = spec.kernel_h;
    const std::size_t kw = spec.kernel_w;
    Tensor<T> wt(Shape{spec.in_channels, spec.out_channels, kh, kw});
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
        for (std::size_t c = 0; c < spec.in_channels; ++c) {
            for (std::size_t u = 0; u < kh; ++u) {
                for (std::size_t v = 0; v < kw; ++v) {
                    wt(c, o, kh - 1 - u, kw - 1 - v) = w(o, c, u, v);
                }
            }
        }
    }
    const ConvSpec flipped{kh, kw, kh - 1 - spec.padding, 1, spec.out_channels, spec.in_channels};
    return forward_gemm(grad_out, wt, Tensor<T>(flipped.bias_shape()), flipped);
}

template <typename T>
ConvGrads<T> backward_gemm(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, const Tensor<T>& grad_out,
                           bool need_grad_x) {
    const Shape& xs = x.shape();
    const Shape& os = grad_out.shape();
    const bool transposed = need_grad_x && transposed_grad_applies(spec);
    const bool scatter = need_grad_x && !transposed;
    ConvGrads<T> g{scatter ? Tensor<T>(xs) : Tensor<T>{}, Tensor<T>(w.shape()), Tensor<T>(spec.bias_shape())};
    const std::size_t kdim = spec.in_channels * spec.kernel_h * spec.kernel_w;
    const std::size_t band_rows = rows_per_band(kdim, os.h, os.w);
    const auto col = std::make_unique_for_overwrite<T[]>(kdim * band_rows * os.w);
    const auto grad_col = std::make_unique_for_overwrite<T[]>(scatter ? kdim * band_rows * os.w : 0);
    const auto out_ch = static_cast<Eigen::Index>(os.c);
    const auto k = static_cast<Eigen::Index>(kdim);
    const Eigen::Map<const RowMat<T>> wm(w.ptr(), out_ch, k);
    Eigen::Map<RowMat<T>> gw(g.grad_w.ptr(), out_ch, k);

    for (std::size_t n = 0; n < os.n; ++n) {
        for (std::size_t o = 0; o < os.c; ++o) {
            const T* go = grad_out.plane(n, o);
            T acc{0};
            for (std::size_t p = 0; p < os.plane(); ++p) {
                acc += go[p];
            }
            g.grad_b[o] += acc;
        }
        for (std::size_t row0 = 0; row0 < os.h; row0 += band_rows) {
            const Band band{row0, std::min(band_rows, os.h - row0)};
            const auto pixels = static_cast<Eigen::Index>(band.rows * os.w);
            im2col(x.plane(n, 0), xs, spec, os.w, band, col.get());
            const Eigen::Map<const RowMat<T>> cm(col.get(), k, pixels);
            const Eigen::Map<const RowMat<T>, 0, Strided> gom(grad_out.plane(n, 0) + row0 * os.w, out_ch, pixels,
                                                               Strided(static_cast<Eigen::Index>(os.plane())));
            gw.noalias() += gom * cm.transpose();
            if (scatter) {
                Eigen::Map<RowMat<T>> gcm(grad_col.get(), k, pixels);
                gcm.noalias() = wm.transpose() * gom;
                col2im_add(grad_col.get(), xs, spec, os.w, band, g.grad_x.plane(n, 0));
            }
        }
    }
    if (transposed) {
        g.grad_x = grad_input_transposed(w, spec, grad_out);
    }
    return g;
}

} // namespace

ConvSpec ConvSpec::same(std::size_t kernel, std::size_t in_channels, std::size_t out_channels) {
    if (kernel % 2 == 0) {
        throw ShapeError("same padding requires an odd kernel, got " + std::to_string(kernel));
    }
    return ConvSpec{kernel, kernel, kernel / 2, 1, in_channels, out_channels};
}

std::size_t ConvSpec::out_h(std::size_t in_h) const { return out_extent(in_h, kernel_h, padding, stride, "height"); }

std::size_t ConvSpec::out_w(std::size_t in_w) const { return out_extent(in_w, kernel_w, padding, stride, "width"); }

Shape ConvSpec::output_shape(const Shape& input) const { return {input.n, out_channels, out_h(input.h), out_w(input.w)}; }

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const ConvSpec& spec,
                         ConvAlgo algo) {
    check_operands(x.shape(), w, spec);
    if (b.shape() != spec.bias_shape()) {
        throw ShapeError("convolution bias shape " + b.shape().str() + " does not match " + spec.bias_shape().str());
    }
    if (resolve<T>(algo) == ConvAlgo::Direct) {
        return forward_direct(x, w, b, spec);
    }
    return forward_gemm(x, w, b, spec);
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, const Tensor<T>& grad_out,
                             ConvAlgo algo, bool need_grad_x) {
    check_operands(x.shape(), w, spec);
    const Shape expected = spec.output_shape(x.shape());
    if (grad_out.shape() != expected) {
        throw ShapeError("convolution upstream gradient shape " + grad_out.shape().str() + " does not match output " +
                         expected.str());
    }
    if (resolve<T>(algo) == ConvAlgo::Direct) {
        return backward_direct(x, w, spec, grad_out, need_grad_x);
    }
    return backward_gemm(x, w, spec, grad_out, need_grad_x);
}

template Tensor<float> conv2d_forward(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                      const ConvSpec&, ConvAlgo);
template Tensor<double> conv2d_forward(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                       const ConvSpec&, ConvAlgo);
template ConvGrads<float> conv2d_backward(const Tensor<float>&, const Tensor<float>&, const ConvSpec&,
                                          const Tensor<float>&, ConvAlgo, bool);
template ConvGrads<double> conv2d_backward(const Tensor<double>&, const Tensor<double>&, const ConvSpec&,
                                           const Tensor<double>&, ConvAlgo, bool);

} // namespace dronenet
