#include "dronenet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "dronenet/loss.hpp"
#include "dronenet/rng.hpp"

namespace dronenet {
namespace {

constexpr std::uint64_t kInputStream = 0x6701;
constexpr std::uint64_t kBiasStream = 0x6702;
constexpr std::uint64_t kPickStream = 0x6703;
constexpr int kMaxDraws = 64;

double loss_at(const DroneNet<double>& model, const Tensor64& x, const Tensor64& gt, ConvAlgo algo) {
    ExecOptions opts;
    opts.algo = algo;
    return mse_loss(model_forward(model, x, nullptr, opts), gt).loss;
}

double rel_error(double a, double n, double floor) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

std::vector<std::size_t> pick_indices(std::size_t size, std::size_t limit, Rng& rng) {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) {
        idx[i] = i;
    }
    if (limit == 0 || limit >= size) {
        return idx;
    }
    for (std::size_t i = 0; i < limit; ++i) {
        std::swap(idx[i], idx[i + rng.below(size - i)]);
    }
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Smallest gap between the winner and the runner-up over all 2x2 pooling windows.
double pool_margin(const Tensor64& y) {
    const Shape& s = y.shape();
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < s.h; i += 2) {
                for (std::size_t j = 0; j < s.w; j += 2) {
                    std::vector<double> v;
                    for (std::size_t di = 0; di < 2 && i + di < s.h; ++di) {
                        for (std::size_t dj = 0; dj < 2 && j + dj < s.w; ++dj) {
                            v.push_back(y(n, c, i + di, j + dj));
                        }
                    }
                    if (v.size() < 2) {
                        continue;
                    }
                    std::sort(v.begin(), v.end(), std::greater<>());
                    margin = std::min(margin, v[0] - v[1]);
                }
            }
        }
    }
    return margin;
}

// Central difference of the loss with respect to *slot.
double numeric_grad(const DroneNet<double>& model, const Tensor64& x, const Tensor64& gt, double* slot, double h,
                    ConvAlgo algo) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss_at(model, x, gt, algo);
    *slot = saved - h;
    const double down = loss_at(model, x, gt, algo);
    *slot = saved;
    return (up - down) / (2.0 * h);
}

} // namespace

GradCheckReport gradient_check(const GradCheckOptions& options) {
    options.config.validate();
    if (!(options.step > 0.0) || !(options.tolerance > 0.0)) {
        throw std::invalid_argument("gradcheck: step and tolerance must be positive");
    }
    const Shape in_shape{1, options.config.in_channels, options.height, options.width};
    const Shape out_shape{1, 1, (options.height + 3) / 4, (options.width + 3) / 4};

    // Redraw until no pooling window is near a tie and no fusion pre-activation is near the
    // ReLU kink, so central differences never straddle a non-differentiable point. At least
    // one output must be active or every gradient is trivially zero.
    DroneNet<double> model(options.config);
    Tensor64 x(in_shape);
    Tensor64 gt(out_shape);
    ForwardCache<double> cache;
    ExecOptions exec;
    exec.algo = options.algo;
    const double margin = 100.0 * options.step;
    bool clear = false;
    for (int draw = 0; draw < kMaxDraws && !clear; ++draw) {
        const std::uint64_t seed = derive_seed(options.seed, static_cast<std::uint64_t>(draw));
        // Glorot-scale weights keep every Tanh and power term well away from linear.
        init_weights(model, seed, WeightInit::Glorot);
        Rng bias_rng(derive_seed(seed, kBiasStream));
        for (auto& col : model.columns()) {
            for (auto& layer : col.layers) {
                for (auto& v : layer.bias.data()) {
                    v = bias_rng.uniform(-0.2, 0.2);
                }
            }
        }
        for (auto& v : model.fusion().bias.data()) {
            v = bias_rng.uniform(-0.2, 0.2);
        }
        Rng data_rng(derive_seed(seed, kInputStream));
        for (auto& v : x.data()) {
            v = data_rng.uniform(-1.0, 1.0);
        }
        for (auto& v : gt.data()) {
            v = data_rng.uniform(0.0, 0.5);
        }
        cache = {};
        model_forward(model, x, &cache, exec);
        const auto pre = cache.fusion_pre.data();
        clear = std::all_of(pre.begin(), pre.end(), [&](double v) { return std::abs(v) > margin; }) &&
                std::any_of(pre.begin(), pre.end(), [](double v) { return v > 0.0; });
        for (std::size_t c = 0; c < cache.columns.size() && clear; ++c) {
            for (std::size_t l = 0; l < cache.columns[c].size() && clear; ++l) {
                if (options.config.columns[c].layers[l].pool_after) {
                    clear = pool_margin(cache.columns[c][l].activation) > margin;
                }
            }
        }
    }
    if (!clear) {
        throw std::runtime_error("gradcheck: could not draw a model clear of pooling ties and the ReLU kink");
    }

    const Tensor64 pred = model_forward(model, x, &cache, exec);
    const LossResult<double> loss = mse_loss(pred, gt);
    ModelGrads<double> grads = model_backward(model, cache, loss.grad, exec, options.check_input);
    if (options.corrupt_bias_grad) {
        grads.params.back()[0] += 1.0;
    }

    // Round-off in the loss, and so in each difference quotient, grows with |loss|.
    const double floor = options.floor * std::max(1.0, std::abs(loss.loss));
    GradCheckReport report;
    report.tolerance = options.tolerance;
    Rng pick(derive_seed(options.seed, kPickStream));
    auto params = model.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry{params[p].name, 0, 0.0};
        Tensor64& t = *params[p].tensor;
        for (std::size_t i : pick_indices(t.size(), options.max_checks_per_tensor, pick)) {
            const double n = numeric_grad(model, x, gt, &t[i], options.step, options.algo);
            entry.max_rel_error = std::max(entry.max_rel_error, rel_error(grads.params[p][i], n, floor));
            ++entry.checked;
        }
        report.entries.push_back(entry);
    }
    if (options.check_input) {
        GradCheckEntry entry{"input", 0, 0.0};
        for (std::size_t i : pick_indices(x.size(), options.max_checks_per_tensor, pick)) {
            const double saved = x[i];
            x[i] = saved + options.step;
            const double up = loss_at(model, x, gt, options.algo);
            x[i] = saved - options.step;
            const double down = loss_at(model, x, gt, options.algo);
            x[i] = saved;
            const double n = (up - down) / (2.0 * options.step);
            entry.max_rel_error = std::max(entry.max_rel_error, rel_error(grads.input[i], n, floor));
            ++entry.checked;
        }
        report.entries.push_back(entry);
    }
    for (const auto& e : report.entries) {
        report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    }
    report.passed = report.max_rel_error < options.tolerance;
    return report;
}

std::vector<std::pair<std::string, DroneNetConfig>> gradcheck_suite() {
    return {{"tiny", DroneNetConfig::tiny()}, {"tiny-q1", DroneNetConfig::tiny().with_uniform_q(1)}};
}

} // namespace dronenet
