#include <gtest/gtest.h>

#include <cmath>
#include <utility>

#include "dronenet/adam.hpp"
#include "dronenet/augment.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/gradcheck.hpp"
#include "dronenet/loss.hpp"
#include "dronenet/trainer.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace dronenet {
namespace {

using testing::random_tensor;
using testing::rel_err;

TEST(Loss, Examples) {
    Rng rng(41);
    const Tensor64 p = random_tensor<double>(rng, Shape{1, 1, 3, 5});
    const auto zero = mse_loss(p, p);
    EXPECT_EQ(zero.loss, 0.0);
    for (double v : zero.grad.data()) EXPECT_EQ(v, 0.0);
    Tensor64 q = p;
    for (auto& v : q.data()) v += 0.5;
    EXPECT_NEAR(mse_loss(q, p).loss, 15 * 0.25, 1e-12);
    EXPECT_THROW(mse_loss(p, Tensor64(Shape{1, 1, 3, 4})), ShapeError);
}

TEST(Loss, BatchMeanAndFiniteDifferences) {
    Rng rng(42);
    Tensor64 p = random_tensor<double>(rng, Shape{3, 1, 2, 4});
    const Tensor64 g = random_tensor<double>(rng, Shape{3, 1, 2, 4});
    double sq = 0;
    for (std::size_t i = 0; i < p.size(); ++i) sq += (p[i] - g[i]) * (p[i] - g[i]);
    const auto r = mse_loss(p, g);
    EXPECT_NEAR(r.loss, sq / 3.0, 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double n = testing::central_diff([&] { return mse_loss(p, g).loss; }, &p[i]);
        EXPECT_LT(rel_err(r.grad[i], n), 1e-6);
    }
}

TEST(Adam, MatchesScalarReference) {
    Rng rng(43);
    Tensor64 a = random_tensor<double>(rng, Shape{1, 1, 2, 3});
    Tensor64 b = random_tensor<double>(rng, Shape{1, 1, 1, 4});
    std::vector<double> ref;
    for (double v : a.data()) ref.push_back(v);
    for (double v : b.data()) ref.push_back(v);
    std::vector<testing::ScalarAdam> scalar(ref.size());
    for (auto& s : scalar) s.lr = 1e-2;
    AdamState<double> state;
    std::vector<Tensor64*> params{&a, &b};
    for (int step = 0; step < 25; ++step) {
        std::vector<Tensor64> grads{random_tensor<double>(rng, a.shape()), random_tensor<double>(rng, b.shape())};
        adam_step<double>(params, grads, state, 1e-2);
        std::size_t k = 0;
        for (const auto& g : grads)
            for (double v : g.data()) {
                ref[k] = scalar[k].step(ref[k], v);
                ++k;
            }
    }
    EXPECT_EQ(state.step, 25u);
    std::size_t k = 0;
    for (double v : a.data()) EXPECT_NEAR(v, ref[k++], 1e-14);
    for (double v : b.data()) EXPECT_NEAR(v, ref[k++], 1e-14);
}

TEST(Adam, RejectsMismatches) {
    Tensor64 a(Shape{1, 1, 1, 2});
    std::vector<Tensor64*> params{&a};
    AdamState<double> state;
    std::vector<Tensor64> wrong{Tensor64(Shape{1, 1, 1, 3})};
    EXPECT_THROW(adam_step<double>(params, wrong, state, 1e-3), ShapeError);
    std::vector<Tensor64> ok{Tensor64(Shape{1, 1, 1, 2})};
    EXPECT_THROW(adam_step<double>(params, ok, state, 0.0), std::invalid_argument);
}

TEST(Augment, FlipIsInvolutionAndDeterministic) {
    const std::vector<Point> pts{{0.0, 1.0}, {3.5, 2.0}, {9.0, 0.0}};
    const auto f = flip_points(pts, 10);
    EXPECT_EQ(f[0].x, 9.0);
    EXPECT_EQ(f[1].x, 5.5);
    EXPECT_EQ(flip_points(f, 10), pts);

    Rng rng(44);
    const Tensor32 img = random_tensor<float>(rng, Shape{1, 3, 6, 10});
    AugmentConfig all;
    all.flip_probability = 1.0;
    Rng r1(7), r2(7);
    const Augmented a = augment(img, pts, all, r1);
    const Augmented b = augment(img, pts, all, r2);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.points, f);
    for (float v : a.image.data()) {
        EXPECT_GE(v, -1.0f);
        EXPECT_LE(v, 1.0f);
    }
    AugmentConfig flip_only = AugmentConfig::none();
    flip_only.flip = true;
    flip_only.flip_probability = 1.0;
    Rng r3(1);
    const Augmented c = augment(img, pts, flip_only, r3);
    EXPECT_EQ(c.image(0, 2, 4, 0), img(0, 2, 4, 9));
    Rng r4(1);
    EXPECT_EQ(augment(img, pts, AugmentConfig::none(), r4).image, img);
}

TEST(TrainConfig, ValidateNamesField) {
    TrainConfig c;
    c.learning_rate = -1;
    try {
        c.validate();
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos) << e.what();
    }
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.sigma = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

std::vector<Sample> toy_samples(std::size_t n) {
    testing::SyntheticOptions o;
    o.images = n;
    o.height = 16;
    o.width = 16;
    o.min_points = 2;
    o.max_points = 5;
    return testing::make_synthetic_samples(o);
}

TEST(Trainer, SeededRunsAreBitIdentical) {
    const auto samples = toy_samples(3);
    TrainConfig c;
    c.epochs = 2;
    c.seed = 5;
    c.learning_rate = 1e-3;
    DroneNet<float> a(DroneNetConfig::tiny()), b(DroneNetConfig::tiny());
    init_weights(a, 2);
    init_weights(b, 2);
    const auto ra = train(a, samples, {}, c);
    const auto rb = train(b, samples, {}, c);
    EXPECT_TRUE(a == b);
    EXPECT_TRUE(ra.best_model == rb.best_model);
    ASSERT_EQ(ra.log.size(), 2u);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(ra.log[e].epoch, e + 1);
        EXPECT_EQ(ra.log[e].train_loss, rb.log[e].train_loss);
        EXPECT_EQ(ra.log[e].val_mae, rb.log[e].val_mae);
    }
}

TEST(Trainer, CallbackSeesEveryEpochAndBestTracking) {
    const auto samples = toy_samples(2);
    TrainConfig c;
    c.epochs = 3;
    c.augment = AugmentConfig::none();
    DroneNet<float> m(DroneNetConfig::tiny());
    init_weights(m, 3);
    std::vector<std::size_t> seen;
    double best = INFINITY;
    const auto r = train(m, samples, samples, c, [&](const EpochLog& e, const DroneNet<float>&, bool is_best) {
        seen.push_back(e.epoch);
        EXPECT_EQ(is_best, e.val_mae < best);
        best = std::min(best, e.val_mae);
        EXPECT_GE(e.seconds, 0.0);
    });
    EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(r.best_val_mae, best);
    EXPECT_NEAR(count_mae(r.best_model, samples, c.sigma), best, 1e-9);
}

TEST(Trainer, BatchesAverageGradients) {
    const auto samples = toy_samples(4);
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 4;
    c.augment = AugmentConfig::none();
    DroneNet<float> m(DroneNetConfig::tiny());
    init_weights(m, 4);
    const DroneNet<float> before = m;
    train(m, samples, samples, c);
    // One Adam step: every parameter with a non-zero gradient moves by about lr.
    const auto pa = before.parameters();
    const auto pb = std::as_const(m).parameters();
    double max_move = 0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t k = 0; k < pa[i]->size(); ++k)
            max_move = std::max(max_move, std::abs(static_cast<double>((*pa[i])[k]) - (*pb[i])[k]));
    EXPECT_LE(max_move, 1.01e-4);
    EXPECT_GT(max_move, 0.9e-4);
}

TEST(Trainer, NonFiniteInputRaisesNumericalError) {
    auto samples = toy_samples(1);
    samples[0].image[0] = NAN;
    DroneNet<float> m(DroneNetConfig::tiny());
    init_weights(m, 1);
    EXPECT_THROW(train(m, samples, {}, TrainConfig{}), NumericalError);
}

TEST(GradCheck, SuitePassesAndFaultIsCaught) {
    for (const auto& [label, config] : gradcheck_suite()) {
        GradCheckOptions o;
        o.config = config;
        const GradCheckReport r = gradient_check(o);
        EXPECT_TRUE(r.passed) << label << " max " << r.max_rel_error;
        EXPECT_LT(r.max_rel_error, 1e-5);
    }
    GradCheckOptions bad;
    bad.corrupt_bias_grad = true;
    bad.max_checks_per_tensor = 2;
    EXPECT_FALSE(gradient_check(bad).passed);
}

TEST(GradCheck, CoversEveryParameterTensor) {
    GradCheckOptions o;
    o.max_checks_per_tensor = 3;
    const auto r = gradient_check(o);
    DroneNet<double> m(o.config);
    EXPECT_EQ(r.entries.size(), m.parameters().size() + 1);
    EXPECT_EQ(r.entries.back().name, "input");
    for (const auto& e : r.entries) EXPECT_GT(e.checked, 0u);
}

} // namespace
} // namespace dronenet
