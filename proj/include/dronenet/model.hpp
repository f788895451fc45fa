#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "dronenet/conv.hpp"
#include "dronenet/ops.hpp"
#include "dronenet/selfonn.hpp"
#include "dronenet/tensor.hpp"

namespace dronenet {

struct LayerDesc {
    std::size_t kernel = 3;
    std::size_t channels = 1;
    int q = 1;
    bool pool_after = false;

    friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

/// One column of the network: Self-ONN layers, each followed by Tanh and optionally a 2x2 max-pool.
struct ColumnSpec {
    std::vector<LayerDesc> layers;

    [[nodiscard]] std::size_t out_channels() const;
    [[nodiscard]] std::size_t pool_count() const;

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Network geometry. Columns run in parallel on the same input, their outputs are
/// concatenated and fused by a 1x1 convolution followed by ReLU.
struct DroneNetConfig {
    std::size_t in_channels = 3;
    std::vector<ColumnSpec> columns;

    /// MCNN column geometry with Self-ONN layers: q=3 in each column's first layer, q=5 elsewhere.
    static DroneNetConfig standard();
    /// Two-layer, two-channel columns for gradient verification on tiny inputs.
    static DroneNetConfig tiny();
    /// Same geometry with every Self-ONN layer set to q (q=1 gives the equivalent CNN).
    [[nodiscard]] DroneNetConfig with_uniform_q(int q) const;

    /// Throws std::invalid_argument on q < 1, empty columns, even kernels or a column
    /// that does not downsample by exactly 4.
    void validate() const;

    [[nodiscard]] std::size_t fusion_in_channels() const;

    friend bool operator==(const DroneNetConfig&, const DroneNetConfig&) = default;
};

template <typename T>
struct ConvLayer {
    ConvSpec spec;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
struct Column {
    std::vector<SelfOnnLayer<T>> layers;
    std::vector<bool> pool_after;
};

/// A named view of one parameter tensor.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
class DroneNet {
public:
    /// Builds the graph with all parameters zero.
    explicit DroneNet(DroneNetConfig config);

    [[nodiscard]] const DroneNetConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<Column<T>>& columns() const noexcept { return columns_; }
    [[nodiscard]] std::vector<Column<T>>& columns() noexcept { return columns_; }
    [[nodiscard]] const ConvLayer<T>& fusion() const noexcept { return fusion_; }
    [[nodiscard]] ConvLayer<T>& fusion() noexcept { return fusion_; }

    /// Every parameter tensor in a stable order: per column and layer the q weight banks
    /// then the bias, finally the fusion weight and bias.
    [[nodiscard]] std::vector<ParamRef<T>> parameters();
    [[nodiscard]] std::vector<const Tensor<T>*> parameters() const;
    [[nodiscard]] std::vector<std::string> parameter_names() const;
    [[nodiscard]] std::size_t parameter_count() const;

    template <typename U>
    [[nodiscard]] DroneNet<U> cast() const {
        DroneNet<U> out(config_);
        auto dst = out.parameters();
        auto src = parameters();
        for (std::size_t i = 0; i < src.size(); ++i) {
            *dst[i].tensor = tensor_cast<U>(*src[i]);
        }
        return out;
    }

    friend bool operator==(const DroneNet& a, const DroneNet& b) {
        if (a.config_ != b.config_) {
            return false;
        }
        const auto pa = a.parameters();
        const auto pb = b.parameters();
        for (std::size_t i = 0; i < pa.size(); ++i) {
            if (!(*pa[i] == *pb[i])) {
                return false;
            }
        }
        return true;
    }

private:
    DroneNetConfig config_;
    std::vector<Column<T>> columns_;
    ConvLayer<T> fusion_;
};

struct ExecOptions {
    ConvAlgo algo = ConvAlgo::Auto;
    /// Columns run concurrently when > 1. Results do not depend on this value.
    unsigned threads = 1;
    /// Throw NumericalError naming the first layer whose output is not finite.
    bool check_finite = false;
};

template <typename T>
struct LayerCache {
    Tensor<T> input;
    Tensor<T> activation; ///< Tanh output
    PoolIndices pool;     ///< valid only when the layer pools
};

/// Activations retained by model_forward for model_backward.
template <typename T>
struct ForwardCache {
    Shape input_shape;
    std::vector<std::vector<LayerCache<T>>> columns;
    Tensor<T> fused_input; ///< concatenated column outputs
    Tensor<T> fusion_pre;  ///< fusion conv output before ReLU
};

template <typename T>
struct ModelGrads {
    std::vector<Tensor<T>> params; ///< aligned with DroneNet::parameters()
    Tensor<T> input;               ///< empty unless requested
};

/// Output is [N, 1, ceil(H/4), ceil(W/4)] and elementwise non-negative.
template <typename T>
Tensor<T> model_forward(const DroneNet<T>& model, const Tensor<T>& x, std::type_identity_t<ForwardCache<T>>* cache = nullptr,
                        const ExecOptions& options = {});

template <typename T>
ModelGrads<T> model_backward(const DroneNet<T>& model, const ForwardCache<T>& cache, const Tensor<T>& grad_out,
                             const ExecOptions& options = {}, bool need_input_grad = false);

enum class WeightInit {
    /// N(0, 0.01^2) for every weight bank, as in the MCNN reference training.
    Gaussian,
    /// Uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)) per weight bank.
    Glorot,
};

inline constexpr double kInitStd = 0.01;

/// Fills every weight bank with the chosen scheme; biases are zeroed.
template <typename T>
void init_weights(DroneNet<T>& model, std::uint64_t seed, WeightInit scheme = WeightInit::Gaussian);

/// Closed form: sum over layers of q * C_out * C_in * K^2 + C_out, plus the fusion conv.
std::size_t parameter_count(const DroneNetConfig& config);

} // namespace dronenet
