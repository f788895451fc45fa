#pragma once

#include <cstdint>
#include <functional>
#include <type_traits>
#include <vector>

#include "dronenet/adam.hpp"
#include "dronenet/augment.hpp"
#include "dronenet/dataset.hpp"
#include "dronenet/model.hpp"

namespace dronenet {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t epochs = 1;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    double sigma = 7.0;
    double val_fraction = 0.30;
    AugmentConfig augment;
    AdamConfig adam;
    std::size_t checkpoint_every = 0; ///< 0: only the best-validation checkpoint
    unsigned threads = 1;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mae = 0.0;
    double seconds = 0.0;
};

template <typename T>
struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
    DroneNet<T> best_model;
};

/// Called after every epoch with the current weights; is_best marks a new best validation MAE.
template <typename T>
using EpochCallback = std::function<void(const EpochLog&, const DroneNet<T>&, bool is_best)>;

/// Mean absolute count error of the model over samples (counts are density-map sums).
template <typename T>
double count_mae(const DroneNet<T>& model, const std::vector<Sample>& samples, double sigma, unsigned threads = 1);

/// Adam on the pixel-wise Euclidean loss, full images. Each epoch shuffles the training set,
/// updates once per batch_size images, then scores MAE on the validation set (on the training
/// set when the validation set is empty). The model is updated in place; the best-validation
/// weights are returned. Throws NumericalError naming the first non-finite layer output.
template <typename T>
TrainResult<T> train(DroneNet<T>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                     const TrainConfig& config, const std::type_identity_t<EpochCallback<T>>& on_epoch = {});

} // namespace dronenet
