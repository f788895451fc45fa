#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "dronenet/benchmark.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/eval_report.hpp"
#include "dronenet/groundtruth.hpp"
#include "dronenet/macs.hpp"
#include "dronenet/metrics.hpp"
#include "dronenet/model_io.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace dronenet {
namespace {

DensityMap random_map(Rng& rng, std::size_t h, std::size_t w, double hi = 1.0) {
    DensityMap m(h, w, MapScale::Output);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform(0.0, hi));
    return m;
}

TEST(Mae, Examples) {
    EXPECT_EQ(mae({}), 0.0);
    const std::vector<CountPair> pairs{{10, 12}, {5, 5}, {0, 3}};
    EXPECT_DOUBLE_EQ(mae(pairs), 5.0 / 3.0);
}

TEST(Game, HandCase) {
    DensityMap pred(2, 2), gt(2, 2);
    pred.at(0, 0) = 1.0f;
    gt.at(0, 1) = 1.0f;
    EXPECT_EQ(game(pred, gt, 2), 2.0);
    EXPECT_EQ(game(pred, gt, 1), 0.0);

    DensityMap a(4, 4), b(4, 4);
    a.at(1, 1) = 1.0f;
    b.at(1, 2) = 1.0f;
    EXPECT_EQ(game(a, b, 2), 2.0);
    EXPECT_EQ(game(a, b, 1), 0.0);
    EXPECT_EQ(game(a, b, 4), 2.0);
}

TEST(Game, CellsPartitionOddExtents) {
    // 5x7 map of ones against zeros: every cell error is its pixel count, which must sum to 35.
    DensityMap ones(5, 7), zeros(5, 7);
    for (auto& v : ones.values) v = 1.0f;
    for (std::size_t g : {1u, 2u, 3u, 4u, 5u}) EXPECT_EQ(game(ones, zeros, g), 35.0) << g;
}

TEST(Game, GridOneIsAbsoluteCountError) {
    Rng rng(51);
    for (int t = 0; t < 50; ++t) {
        const std::size_t h = testing::random_between(rng, 1, 20);
        const std::size_t w = testing::random_between(rng, 1, 20);
        const DensityMap a = random_map(rng, h, w), b = random_map(rng, h, w);
        EXPECT_NEAR(game(a, b, 1), std::abs(a.sum() - b.sum()), 1e-9);
        // Finer grids can only expose more error.
        EXPECT_GE(game(a, b, 4) + 1e-9, game(a, b, 1));
    }
}

TEST(Game, DatasetGridOneEqualsMae) {
    Rng rng(52);
    for (int t = 0; t < 20; ++t) {
        std::vector<MapPair> maps;
        std::vector<CountPair> counts;
        const std::size_t n = testing::random_between(rng, 1, 8);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t h = testing::random_between(rng, 2, 16);
            const std::size_t w = testing::random_between(rng, 2, 16);
            maps.push_back({random_map(rng, h, w, 3.0), random_map(rng, h, w, 3.0)});
            counts.push_back({maps.back().pred.sum(), maps.back().gt.sum()});
        }
        EXPECT_NEAR(game(maps, 1), mae(counts), 1e-9);
    }
    EXPECT_EQ(game(std::vector<MapPair>{}, 4), 0.0);
}

TEST(Game, ShapeMismatchThrows) {
    EXPECT_THROW(game(DensityMap(2, 2), DensityMap(2, 3), 1), ShapeError);
}

TEST(Ssim, IdentityAndSymmetry) {
    Rng rng(53);
    for (int t = 0; t < 20; ++t) {
        const std::size_t h = testing::random_between(rng, 3, 30);
        const std::size_t w = testing::random_between(rng, 3, 30);
        const DensityMap a = random_map(rng, h, w), b = random_map(rng, h, w);
        EXPECT_EQ(ssim(a, a), 1.0);
        EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
        EXPECT_LE(ssim(a, b), 1.0);
    }
    const DensityMap flat(12, 12);
    EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, MatchesWindowOracle) {
    Rng rng(54);
    for (int t = 0; t < 10; ++t) {
        const std::size_t h = testing::random_between(rng, 5, 24);
        const std::size_t w = testing::random_between(rng, 5, 24);
        const DensityMap a = random_map(rng, h, w, 0.2), b = random_map(rng, h, w, 0.5);
        const double L = std::max(a.max() - a.min(), b.max() - b.min());
        EXPECT_NEAR(ssim(a, b), testing::window_ssim(a, b, L), 1e-9) << h << "x" << w;
    }
}

TEST(Psnr, IdentityIsInfinite) {
    Rng rng(55);
    const DensityMap a = random_map(rng, 9, 7);
    EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
}

TEST(Psnr, KnownValue) {
    DensityMap gt(2, 2), pred(2, 2);
    gt.at(0, 0) = 2.0f;
    pred.at(0, 0) = 2.0f;
    pred.at(1, 1) = 0.5f; // MSE = 0.25 / 4
    EXPECT_NEAR(psnr(pred, gt), 10.0 * std::log10(4.0 / (0.25 / 4.0)), 1e-9);
    // All-zero ground truth falls back to the prediction peak.
    DensityMap zero(2, 2);
    EXPECT_NEAR(psnr(pred, zero), 10.0 * std::log10(4.0 / ((4.0 + 0.25) / 4.0)), 1e-6);
}

TEST(FiniteMean, SkipsInfinities) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(finite_mean(std::vector<double>{1.0, inf, 3.0}), 2.0);
    EXPECT_EQ(finite_mean(std::vector<double>{inf, inf}), inf);
    EXPECT_EQ(finite_mean(std::vector<double>{}), inf);
}

class BenchEnv : public ::testing::Test {
protected:
    void TearDown() override {
        unsetenv(kBenchWarmupEnv);
        unsetenv(kBenchRunsEnv);
    }
};

TEST_F(BenchEnv, TimingIdentities) {
    DroneNet<float> m(DroneNetConfig::tiny());
    init_weights(m, 1);
    const BenchmarkResult r = benchmark(m, Shape{1, 3, 16, 16}, 1, 5);
    EXPECT_EQ(r.runs, 5u);
    EXPECT_EQ(r.warmup, 1u);
    EXPECT_GT(r.mean_ms, 0.0);
    EXPECT_LE(r.min_ms, r.mean_ms);
    EXPECT_GE(r.std_ms, 0.0);
    EXPECT_NEAR(r.fps * r.mean_ms, 1000.0, 1e-6);
    EXPECT_NEAR(r.total_seconds * 1000.0, r.mean_ms * 5, 1e-9);
}

TEST_F(BenchEnv, ZeroRunsRejectedAndEnvironmentOverrides) {
    DroneNet<float> m(DroneNetConfig::tiny());
    EXPECT_THROW(benchmark(m, Shape{1, 3, 8, 8}, 0, 0), std::invalid_argument);
    setenv(kBenchRunsEnv, "2", 1);
    setenv(kBenchWarmupEnv, "0", 1);
    const auto r = benchmark(m, Shape{1, 3, 8, 8}, 5, 50);
    EXPECT_EQ(r.runs, 2u);
    EXPECT_EQ(r.warmup, 0u);
    setenv(kBenchRunsEnv, "two", 1);
    EXPECT_THROW(benchmark(m, Shape{1, 3, 8, 8}, 0, 1), std::invalid_argument);
}

TEST(Footprint, SizeAndMacs) {
    DroneNet<float> m(DroneNetConfig::standard());
    const Footprint f = model_footprint(m);
    EXPECT_EQ(f.size_bytes, serialize_model(m).size());
    EXPECT_NEAR(f.gmacs, count_macs(m, kReferenceHeight, kReferenceWidth).gmacs(), 1e-12);
}

EvalReport sample_report() {
    EvalReport r;
    r.dataset_id = "toy";
    r.model_id = "m1";
    r.images = 3;
    r.mae = 1.25;
    r.game = {{1, 1.25}, {4, 2.5}};
    r.ssim = 0.75;
    r.psnr = std::numeric_limits<double>::infinity();
    r.model_size_bytes = 1234;
    r.gmacs = 0.5;
    r.inference_ms = 3.0;
    r.inference_std_ms = 0.1;
    r.throughput_fps = 1000.0 / 3.0;
    return r;
}

TEST(EvalReport, JsonRoundTripKeepsInfinity) {
    const EvalReport r = sample_report();
    const std::string json = report_to_json(r);
    EXPECT_NE(json.find("\"inf\""), std::string::npos);
    const EvalReport back = report_from_json(json);
    EXPECT_EQ(back.dataset_id, "toy");
    EXPECT_EQ(back.images, 3u);
    EXPECT_EQ(back.psnr, r.psnr);
    ASSERT_EQ(back.game.size(), 2u);
    EXPECT_EQ(back.game[1].grid, 4u);
    EXPECT_EQ(back.game[1].value, 2.5);
    EXPECT_EQ(back.throughput_fps, r.throughput_fps);
    EXPECT_EQ(report_to_json(back), json);
}

TEST(EvalReport, CsvAppendsHeaderOnce) {
    const auto dir = testing::scratch_dir("metrics_csv");
    const auto path = dir / "results.csv";
    const EvalReport r = sample_report();
    append_results_csv(r, path);
    append_results_csv(r, path);
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], report_csv_header(r));
    EXPECT_EQ(lines[1], report_csv_row(r));
    EXPECT_EQ(lines[1], lines[2]);
    EXPECT_NE(lines[0].find("game4"), std::string::npos) << lines[0];
}

TEST(Evaluate, PerfectCountsOnEmptyScenes) {
    // A zero model predicts zero density; on images without points every count error vanishes.
    testing::SyntheticOptions o;
    o.images = 2;
    o.height = 16;
    o.width = 16;
    o.min_points = 0;
    o.max_points = 0;
    const auto samples = testing::make_synthetic_samples(o);
    DroneNet<float> m(DroneNetConfig::tiny());
    EvalOptions eo;
    eo.grids = {1, 2};
    eo.bench_warmup = 0;
    eo.bench_runs = 1;
    const EvalReport r = evaluate(m, samples, eo, "toy", "zero");
    EXPECT_EQ(r.images, 2u);
    EXPECT_EQ(r.mae, 0.0);
    ASSERT_EQ(r.game.size(), 2u);
    EXPECT_EQ(r.game[0].value, 0.0);
    EXPECT_EQ(r.psnr, std::numeric_limits<double>::infinity());
    EXPECT_EQ(r.ssim, 1.0);
    EXPECT_GT(r.throughput_fps, 0.0);
}

TEST(Evaluate, GridOneMatchesMae) {
    testing::SyntheticOptions o;
    o.images = 3;
    o.height = 32;
    o.width = 32;
    const auto samples = testing::make_synthetic_samples(o);
    DroneNet<float> m(DroneNetConfig::tiny());
    init_weights(m, 9);
    EvalOptions eo;
    eo.grids = {1};
    eo.bench_runs = 1;
    const EvalReport r = evaluate(m, samples, eo, "toy", "m");
    // MAE is taken against annotation counts, GAME against the float32 ground-truth maps whose
    // integrals match the counts only to float rounding.
    double map_vs_count = 0.0;
    for (const auto& s : samples) {
        const DensityMap gt = downsample_gt(generate_density_map(s.points, 32, 32, eo.sigma), 4);
        map_vs_count += std::abs(gt.sum() - static_cast<double>(s.points.size()));
    }
    EXPECT_LE(std::abs(r.game[0].value - r.mae), map_vs_count / 3.0 + 1e-9);
}

} // namespace
} // namespace dronenet
