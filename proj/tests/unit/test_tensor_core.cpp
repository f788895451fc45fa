#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dronenet/conv.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/ops.hpp"
#include "oracles.hpp"

namespace dronenet {
namespace {

using testing::brute_conv;
using testing::central_diff;
using testing::random_between;
using testing::random_tensor;
using testing::rel_err;

TEST(Conv, AllOnesGivesNine) {
    const Tensor64 x(Shape{1, 1, 3, 3}, 1.0);
    const Tensor64 w(Shape{1, 1, 3, 3}, 1.0);
    const Tensor64 b(Shape{1, 1, 1, 1});
    const ConvSpec spec{3, 3, 0, 1, 1, 1};
    for (auto algo : {ConvAlgo::Direct, ConvAlgo::Gemm}) {
        const Tensor64 y = conv2d_forward(x, w, b, spec, algo);
        ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
        EXPECT_EQ(y[0], 9.0);
    }
}

TEST(Conv, ZeroInputGivesBias) {
    const ConvSpec spec = ConvSpec::same(3, 2, 3);
    Rng rng(1);
    const Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
    const Tensor64 b(spec.bias_shape(), std::vector<double>{0.5, -1.25, 3.0});
    const Tensor64 y = conv2d_forward(Tensor64(Shape{1, 2, 4, 5}), w, b, spec);
    for (std::size_t o = 0; o < 3; ++o)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(y(0, o, i, j), b[o]);
}

TEST(Conv, MatchesBruteForceOracle) {
    Rng rng(2);
    const ConvSpec spec{3, 3, 1, 1, 2, 3};
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 5, 5});
    const Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
    const Tensor64 b = random_tensor<double>(rng, spec.bias_shape());
    const Tensor64 ref = brute_conv(x, w, b, 1);
    for (auto algo : {ConvAlgo::Direct, ConvAlgo::Gemm}) {
        const Tensor64 y = conv2d_forward(x, w, b, spec, algo);
        ASSERT_EQ(y.shape(), ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
}

TEST(Conv, RandomShapesMatchOracle) {
    Rng rng(3);
    for (int t = 0; t < 40; ++t) {
        const std::size_t k = 2 * random_between(rng, 0, 3) + 1;
        const std::size_t pad = random_between(rng, 0, k / 2);
        const std::size_t stride = random_between(rng, 1, 2);
        const std::size_t h = k + stride * random_between(rng, 0, 4);
        const std::size_t wd = k + stride * random_between(rng, 0, 4);
        if ((h + 2 * pad - k) % stride != 0 || (wd + 2 * pad - k) % stride != 0) {
            continue;
        }
        const ConvSpec spec{k, k, pad, stride, random_between(rng, 1, 4), random_between(rng, 1, 4)};
        const Tensor64 x = random_tensor<double>(rng, Shape{random_between(rng, 1, 2), spec.in_channels, h, wd});
        const Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
        const Tensor64 b = random_tensor<double>(rng, spec.bias_shape());
        const Tensor64 ref = brute_conv(x, w, b, pad, stride);
        const Tensor64 direct = conv2d_forward(x, w, b, spec, ConvAlgo::Direct);
        const Tensor64 gemm = conv2d_forward(x, w, b, spec, ConvAlgo::Gemm);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            EXPECT_NEAR(direct[i], ref[i], 1e-12);
            EXPECT_NEAR(gemm[i], ref[i], 1e-12);
        }
    }
}

TEST(Conv, GemmAgreesWithDirectInFloat) {
    Rng rng(4);
    const ConvSpec spec = ConvSpec::same(5, 6, 7);
    const Tensor32 x = random_tensor<float>(rng, Shape{2, 6, 13, 11});
    const Tensor32 w = random_tensor<float>(rng, spec.weight_shape());
    const Tensor32 b = random_tensor<float>(rng, spec.bias_shape());
    const Tensor32 d = conv2d_forward(x, w, b, spec, ConvAlgo::Direct);
    const Tensor32 g = conv2d_forward(x, w, b, spec, ConvAlgo::Gemm);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_LE(rel_err(d[i], g[i], 1.0), 1e-5);
    }
}

TEST(Conv, ShapeErrors) {
    const ConvSpec spec = ConvSpec::same(3, 2, 1);
    const Tensor64 w(spec.weight_shape());
    const Tensor64 b(spec.bias_shape());
    EXPECT_THROW(conv2d_forward(Tensor64(Shape{1, 3, 4, 4}), w, b, spec), ShapeError);
    EXPECT_THROW(conv2d_forward(Tensor64(Shape{1, 2, 4, 4}), Tensor64(Shape{1, 2, 5, 5}), b, spec), ShapeError);
    EXPECT_THROW(conv2d_forward(Tensor64(Shape{1, 2, 4, 4}), w, Tensor64(Shape{1, 2, 1, 1}), spec), ShapeError);
    const ConvSpec strided{3, 3, 0, 2, 2, 1};
    EXPECT_THROW(conv2d_forward(Tensor64(Shape{1, 2, 6, 6}), w, b, strided), ShapeError);
    EXPECT_THROW(ConvSpec::same(4, 1, 1), ShapeError);
    EXPECT_THROW(conv2d_backward(Tensor64(Shape{1, 2, 4, 4}), w, spec, Tensor64(Shape{1, 1, 3, 3})), ShapeError);
}

TEST(Conv, LinearInInputAndWeights) {
    Rng rng(5);
    const ConvSpec spec = ConvSpec::same(3, 3, 2);
    for (int t = 0; t < 10; ++t) {
        const Tensor64 x1 = random_tensor<double>(rng, Shape{1, 3, 6, 7});
        const Tensor64 x2 = random_tensor<double>(rng, Shape{1, 3, 6, 7});
        const Tensor64 w1 = random_tensor<double>(rng, spec.weight_shape());
        const Tensor64 w2 = random_tensor<double>(rng, spec.weight_shape());
        const Tensor64 b = random_tensor<double>(rng, spec.bias_shape());
        Tensor64 xs = x1, ws = w1;
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += x2[i];
        for (std::size_t i = 0; i < ws.size(); ++i) ws[i] += w2[i];
        const Tensor64 a = conv2d_forward(x1, w1, b, spec);
        const Tensor64 c = conv2d_forward(x2, w1, b, spec);
        const Tensor64 s = conv2d_forward(xs, w1, b, spec);
        const Tensor64 d = conv2d_forward(x1, w2, b, spec);
        const Tensor64 sw = conv2d_forward(x1, ws, b, spec);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double bias = b[(i / 42) % 2];
            EXPECT_NEAR(s[i], a[i] + c[i] - bias, 1e-12);
            EXPECT_NEAR(sw[i], a[i] + d[i] - bias, 1e-12);
        }
    }
}

TEST(ConvBackward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(6);
    const ConvSpec spec = ConvSpec::same(3, 2, 2);
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 4, 4});
    const Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
    for (auto algo : {ConvAlgo::Direct, ConvAlgo::Gemm}) {
        const auto g = conv2d_backward(x, w, spec, Tensor64(Shape{1, 2, 4, 4}), algo);
        for (double v : g.grad_x.data()) EXPECT_EQ(v, 0.0);
        for (double v : g.grad_w.data()) EXPECT_EQ(v, 0.0);
        for (double v : g.grad_b.data()) EXPECT_EQ(v, 0.0);
    }
}

TEST(ConvBackward, OneByOneKernelWeightGradIsDotProduct) {
    Rng rng(7);
    const ConvSpec spec{1, 1, 0, 1, 1, 1};
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 1, 3, 4});
    const Tensor64 go = random_tensor<double>(rng, Shape{1, 1, 3, 4});
    double dot = 0.0, gsum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * go[i];
        gsum += go[i];
    }
    const auto g = conv2d_backward(x, Tensor64(spec.weight_shape(), 2.0), spec, go, ConvAlgo::Direct);
    EXPECT_NEAR(g.grad_w[0], dot, 1e-14);
    EXPECT_NEAR(g.grad_b[0], gsum, 1e-14);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(g.grad_x[i], 2.0 * go[i]);
}

// Loss = sum(conv(x) * r) for a fixed random r, so dL/dy = r.
TEST(ConvBackward, MatchesFiniteDifferences) {
    Rng rng(8);
    for (const ConvSpec spec : {ConvSpec{3, 3, 1, 1, 2, 3}, ConvSpec{5, 5, 2, 1, 3, 2}, ConvSpec{3, 3, 0, 2, 2, 2},
                                ConvSpec{3, 3, 2, 1, 1, 2}}) {
        Tensor64 x = random_tensor<double>(rng, Shape{2, spec.in_channels, 7, 7});
        Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
        Tensor64 b = random_tensor<double>(rng, spec.bias_shape());
        const Tensor64 r = random_tensor<double>(rng, spec.output_shape(x.shape()));
        auto loss = [&] {
            const Tensor64 y = brute_conv(x, w, b, spec.padding, spec.stride);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
            return s;
        };
        for (auto algo : {ConvAlgo::Direct, ConvAlgo::Gemm}) {
            const auto g = conv2d_backward(x, w, spec, r, algo);
            for (std::size_t i = 0; i < x.size(); ++i)
                EXPECT_LT(rel_err(g.grad_x[i], central_diff(loss, &x[i])), 1e-6);
            for (std::size_t i = 0; i < w.size(); ++i)
                EXPECT_LT(rel_err(g.grad_w[i], central_diff(loss, &w[i])), 1e-6);
            for (std::size_t i = 0; i < b.size(); ++i)
                EXPECT_LT(rel_err(g.grad_b[i], central_diff(loss, &b[i])), 1e-6);
        }
    }
}

TEST(ConvBackward, SkippingInputGradLeavesItEmpty) {
    Rng rng(9);
    const ConvSpec spec = ConvSpec::same(3, 2, 2);
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 5, 5});
    const Tensor64 w = random_tensor<double>(rng, spec.weight_shape());
    const Tensor64 go = random_tensor<double>(rng, Shape{1, 2, 5, 5});
    const auto full = conv2d_backward(x, w, spec, go, ConvAlgo::Gemm, true);
    const auto part = conv2d_backward(x, w, spec, go, ConvAlgo::Gemm, false);
    EXPECT_TRUE(part.grad_x.empty());
    EXPECT_EQ(part.grad_w, full.grad_w);
}

TEST(Pow, Examples) {
    const Tensor64 x(Shape{1, 1, 1, 2}, std::vector<double>{-0.5, 0.5});
    const Tensor64 sq = elementwise_pow(x, 2);
    EXPECT_EQ(sq[0], 0.25);
    EXPECT_EQ(sq[1], 0.25);
    EXPECT_EQ(elementwise_pow(x, 1), x);
    EXPECT_EQ(elementwise_pow(x, 3)[0], -0.125);
    EXPECT_THROW(elementwise_pow(x, 0), std::invalid_argument);
}

TEST(Pow, MatchesMultiplicationLoop) {
    Rng rng(10);
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 3, 4});
    for (int q = 1; q <= 7; ++q) EXPECT_EQ(elementwise_pow(x, q), testing::loop_pow(x, q)) << "q=" << q;
}

TEST(MaxPool, SingleWindow) {
    const Tensor64 x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    const auto r = maxpool2x2_forward(x);
    EXPECT_EQ(r.output[0], 4.0);
    EXPECT_EQ(r.indices.argmax[0], 3);
}

TEST(MaxPool, TiesGoToFirstPosition) {
    const auto r = maxpool2x2_forward(Tensor64(Shape{1, 2, 4, 6}, 1.5));
    for (double v : r.output.data()) EXPECT_EQ(v, 1.5);
    for (auto a : r.indices.argmax) EXPECT_EQ(a, 0);
}

TEST(MaxPool, MatchesWindowScanIncludingOddExtents) {
    Rng rng(11);
    for (int t = 0; t < 30; ++t) {
        const Shape s{random_between(rng, 1, 2), random_between(rng, 1, 3), random_between(rng, 1, 9),
                      random_between(rng, 1, 9)};
        Tensor64 x = random_tensor<double>(rng, s);
        if (t % 3 == 0) {
            for (auto& v : x.data()) v = std::round(v * 2.0); // many ties
        }
        std::vector<std::size_t> winners;
        const Tensor64 ref = testing::scan_maxpool(x, &winners);
        const auto r = maxpool2x2_forward(x);
        ASSERT_EQ(r.output, ref);
        // Backward with unit upstream deposits one unit per window at the scanned winner
        // (replicated border positions fold back onto the real last row/column).
        const Tensor64 gx = maxpool2x2_backward(Tensor64(ref.shape(), 1.0), r.indices);
        Tensor64 expect(s);
        for (std::size_t at : winners) expect[at] += 1.0;
        EXPECT_EQ(gx, expect);
    }
}

TEST(MaxPool, BackwardConservesMass) {
    Rng rng(12);
    const Tensor64 x = random_tensor<double>(rng, Shape{2, 3, 8, 6});
    const auto r = maxpool2x2_forward(x);
    const Tensor64 go = random_tensor<double>(rng, r.output.shape());
    const Tensor64 gx = maxpool2x2_backward(go, r.indices);
    double a = 0, b = 0;
    for (double v : go.data()) a += std::abs(v);
    for (double v : gx.data()) b += std::abs(v);
    EXPECT_NEAR(a, b, 1e-12);
}

TEST(Activations, Examples) {
    const Tensor64 z(Shape{1, 1, 1, 1});
    EXPECT_EQ(tanh_forward(z)[0], 0.0);
    const Tensor64 x(Shape{1, 1, 1, 3}, std::vector<double>{-3.0, 0.0, 3.0});
    const Tensor64 y = relu_forward(x);
    EXPECT_EQ(y[0], 0.0);
    EXPECT_EQ(y[2], 3.0);
    const Tensor64 g = relu_backward(x, Tensor64(x.shape(), 1.0));
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_EQ(g[2], 1.0);
}

TEST(Activations, GradientsMatchFiniteDifferences) {
    Rng rng(13);
    Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 3, 3}, -2.0, 2.0);
    for (auto& v : x.data()) {
        if (std::abs(v) < 0.05) v = 0.5;
    }
    const Tensor64 r = random_tensor<double>(rng, x.shape());
    auto weighted = [&](const Tensor64& y) {
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };
    const Tensor64 gt = tanh_backward(tanh_forward(x), r);
    const Tensor64 gr = relu_backward(x, r);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_LT(rel_err(gt[i], central_diff([&] { return weighted(tanh_forward(x)); }, &x[i])), 1e-6);
        EXPECT_LT(rel_err(gr[i], central_diff([&] { return weighted(relu_forward(x)); }, &x[i]), 1e-12), 1e-6);
    }
}

TEST(Concat, ShapesAndRoundTrip) {
    Rng rng(14);
    std::vector<Tensor64> parts{random_tensor<double>(rng, Shape{1, 8, 3, 4}),
                                random_tensor<double>(rng, Shape{1, 10, 3, 4}),
                                random_tensor<double>(rng, Shape{1, 12, 3, 4})};
    const Tensor64 cat = concat_channels<double>(parts);
    EXPECT_EQ(cat.shape(), (Shape{1, 30, 3, 4}));
    EXPECT_EQ(cat(0, 8, 1, 2), parts[1](0, 0, 1, 2));
    const std::vector<std::size_t> ch{8, 10, 12};
    const auto back = split_channels(cat, std::span<const std::size_t>(ch));
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back[k], parts[k]);
    EXPECT_EQ(concat_channels<double>(std::span<const Tensor64>(parts.data(), 1)), parts[0]);
    std::vector<Tensor64> bad{Tensor64(Shape{1, 1, 3, 4}), Tensor64(Shape{1, 1, 3, 5})};
    EXPECT_THROW(concat_channels<double>(bad), ShapeError);
}

TEST(SumPool, Examples) {
    EXPECT_EQ(sum_pool(Tensor64(Shape{1, 1, 4, 4}, 1.0), 4)[0], 16.0);
    Rng rng(15);
    const Tensor64 x = random_tensor<double>(rng, Shape{1, 2, 5, 3});
    EXPECT_EQ(sum_pool(x, 1), x);
}

TEST(SumPool, MatchesLoopOracleAndConservesMass) {
    Rng rng(16);
    for (int t = 0; t < 30; ++t) {
        const Shape s{1, random_between(rng, 1, 2), random_between(rng, 1, 17), random_between(rng, 1, 17)};
        const std::size_t f = random_between(rng, 1, 5);
        const Tensor64 x = random_tensor<double>(rng, s, 0.0, 1.0);
        const Tensor64 y = sum_pool(x, f);
        const Tensor64 ref = testing::loop_sum_pool(x, f);
        ASSERT_EQ(y.shape(), ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
        EXPECT_LE(std::abs(y.sum() - x.sum()), 1e-9 * std::abs(x.sum()));
    }
}

TEST(Tensor, ValidityScan) {
    Tensor32 t(Shape{1, 1, 2, 2}, 1.0f);
    EXPECT_TRUE(t.all_finite());
    t[3] = std::nanf("");
    EXPECT_FALSE(t.all_finite());
    t[3] = INFINITY;
    EXPECT_FALSE(t.all_finite());
    EXPECT_THROW(Tensor32(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Rng, NormalMoments) {
    Rng rng(61);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        ASSERT_TRUE(std::isfinite(v));
        m1 += v;
        m2 += v * v;
        m4 += v * v * v * v;
    }
    EXPECT_NEAR(m1 / n, 0.0, 0.01);
    EXPECT_NEAR(m2 / n, 1.0, 0.01);
    EXPECT_NEAR(m4 / n, 3.0, 0.06);
    Rng a(5), b(5);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

} // namespace
} // namespace dronenet
