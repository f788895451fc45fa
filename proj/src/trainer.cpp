#include "dronenet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dronenet/errors.hpp"
#include "dronenet/groundtruth.hpp"
#include "dronenet/loss.hpp"

namespace dronenet {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("lr must be positive");
    }
    if (epochs == 0) {
        throw std::invalid_argument("epochs must be positive");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("batch_size must be positive");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("sigma must be positive");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("val_fraction must lie in (0, 1)");
    }
    if (augment.contrast_min > augment.contrast_max || augment.brightness_delta < 0.0) {
        throw std::invalid_argument("augmentation ranges are inverted");
    }
}

template <typename T>
double count_mae(const DroneNet<T>& model, const std::vector<Sample>& samples, double sigma, unsigned threads) {
    if (samples.empty()) {
        return 0.0;
    }
    ExecOptions opts;
    opts.threads = threads;
    double total = 0.0;
    for (const auto& s : samples) {
        const Tensor<T> pred = model_forward(model, tensor_cast<T>(s.image), nullptr, opts);
        const double estimate = static_cast<double>(pred.sum());
        total += std::abs(estimate - sample_ground_truth(s, sigma).sum());
    }
    return total / static_cast<double>(samples.size());
}

template <typename T>
TrainResult<T> train(DroneNet<T>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                     const TrainConfig& config, const std::type_identity_t<EpochCallback<T>>& on_epoch) {
    config.validate();
    if (train_set.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    const std::size_t channels = model.config().in_channels;
    for (const auto& s : train_set) {
        if (s.image.shape().c != channels) {
            throw DataError("image " + s.id + " has " + std::to_string(s.image.shape().c) +
                            " channels, the model expects " + std::to_string(channels));
        }
    }

    TrainResult<T> result{{}, 0, 0.0, model};
    AdamState<T> adam(config.adam);
    ExecOptions opts;
    opts.threads = config.threads;
    opts.check_finite = true;
    const auto params = model.parameters();
    std::vector<Tensor<T>*> param_ptrs;
    for (const auto& p : params) {
        param_ptrs.push_back(p.tensor);
    }
    bool have_best = false;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng(derive_seed(config.seed, epoch));
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }

        double loss_sum = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(b1 - b0);
            std::vector<Tensor<T>> grads;
            for (std::size_t k = b0; k < b1; ++k) {
                const Sample& s = train_set[order[k]];
                Augmented aug = augment(s.image, s.points, config.augment, rng);
                const Shape& is = aug.image.shape();
                const DensityMap gt = downsample_gt(generate_density_map(aug.points, is.h, is.w, config.sigma), 4);

                ForwardCache<T> cache;
                const Tensor<T> pred = model_forward(model, tensor_cast<T>(aug.image), &cache, opts);
                LossResult<T> loss = mse_loss(pred, to_tensor<T>(gt));
                if (!std::isfinite(loss.loss)) {
                    throw NumericalError("loss is not finite at epoch " + std::to_string(epoch) + " on image " + s.id);
                }
                loss_sum += loss.loss;
                ModelGrads<T> g = model_backward(model, cache, loss.grad, opts);
                if (grads.empty()) {
                    grads = std::move(g.params);
                    if (b1 - b0 > 1) {
                        for (auto& t : grads) {
                            for (auto& v : t.data()) {
                                v = static_cast<T>(v * inv_batch);
                            }
                        }
                    }
                } else {
                    for (std::size_t p = 0; p < grads.size(); ++p) {
                        for (std::size_t i = 0; i < grads[p].size(); ++i) {
                            grads[p][i] += static_cast<T>(g.params[p][i] * inv_batch);
                        }
                    }
                }
            }
            adam_step<T>(param_ptrs, grads, adam, config.learning_rate);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(train_set.size());
        entry.val_mae = count_mae(model, val_set.empty() ? train_set : val_set, config.sigma, config.threads);
        entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool is_best = !have_best || entry.val_mae < result.best_val_mae;
        if (is_best) {
            have_best = true;
            result.best_epoch = epoch;
            result.best_val_mae = entry.val_mae;
            result.best_model = model;
        }
        result.log.push_back(entry);
        if (on_epoch) {
            on_epoch(entry, model, is_best);
        }
    }
    return result;
}

template double count_mae(const DroneNet<float>&, const std::vector<Sample>&, double, unsigned);
template double count_mae(const DroneNet<double>&, const std::vector<Sample>&, double, unsigned);
template TrainResult<float> train(DroneNet<float>&, const std::vector<Sample>&, const std::vector<Sample>&,
                                  const TrainConfig&, const EpochCallback<float>&);
template TrainResult<double> train(DroneNet<double>&, const std::vector<Sample>&, const std::vector<Sample>&,
                                   const TrainConfig&, const EpochCallback<double>&);

} // namespace dronenet
