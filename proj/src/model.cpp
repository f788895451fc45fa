#include "dronenet/model.hpp"

#include <cmath>
#include <functional>
#include <future>
#include <stdexcept>

#include "dronenet/errors.hpp"
#include "dronenet/rng.hpp"

namespace dronenet {

namespace {

ColumnSpec column(std::initializer_list<LayerDesc> layers) { return ColumnSpec{std::vector<LayerDesc>(layers)}; }

// Runs fn(c) for each column, concurrently when threads > 1.
void for_each_column(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t c = 0; c < count; ++c) {
            fn(c);
        }
        return;
    }
    std::vector<std::future<void>> pending;
    for (std::size_t c = 1; c < count; ++c) {
        pending.push_back(std::async(std::launch::async, fn, c));
    }
    fn(0);
    for (auto& f : pending) {
        f.get();
    }
}

std::string layer_name(std::size_t col, std::size_t layer) {
    return "col" + std::to_string(col) + ".layer" + std::to_string(layer);
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
    if (!t.all_finite()) {
        throw NumericalError("non-finite values in output of " + where);
    }
}

} // namespace

std::size_t ColumnSpec::out_channels() const { return layers.empty() ? 0 : layers.back().channels; }

std::size_t ColumnSpec::pool_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.pool_after ? 1 : 0;
    }
    return n;
}

DroneNetConfig DroneNetConfig::standard() {
    DroneNetConfig c;
    c.in_channels = 3;
    c.columns = {
        column({{9, 16, 3, true}, {7, 32, 5, true}, {7, 16, 5, false}, {7, 8, 5, false}}),
        column({{7, 20, 3, true}, {5, 40, 5, true}, {5, 20, 5, false}, {5, 10, 5, false}}),
        column({{5, 24, 3, true}, {3, 48, 5, true}, {3, 24, 5, false}, {3, 12, 5, false}}),
    };
    return c;
}

DroneNetConfig DroneNetConfig::tiny() {
    DroneNetConfig c;
    c.in_channels = 3;
    c.columns = {
        column({{5, 2, 3, true}, {3, 2, 5, true}}),
        column({{3, 2, 3, true}, {3, 2, 5, true}}),
        column({{3, 2, 3, true}, {1, 2, 5, true}}),
    };
    return c;
}

DroneNetConfig DroneNetConfig::with_uniform_q(int q) const {
    DroneNetConfig c = *this;
    for (auto& col : c.columns) {
        for (auto& l : col.layers) {
            l.q = q;
        }
    }
    return c;
}

void DroneNetConfig::validate() const {
    if (in_channels == 0) {
        throw std::invalid_argument("model config: input channel count must be positive");
    }
    if (columns.empty()) {
        throw std::invalid_argument("model config: at least one column is required");
    }
    for (std::size_t ci = 0; ci < columns.size(); ++ci) {
        const auto& col = columns[ci];
        if (col.layers.empty()) {
            throw std::invalid_argument("model config: column " + std::to_string(ci) + " has no layers");
        }
        for (std::size_t li = 0; li < col.layers.size(); ++li) {
            const auto& l = col.layers[li];
            const std::string where = layer_name(ci, li);
            if (l.q < 1) {
                throw std::invalid_argument("model config: " + where + " requests q=" + std::to_string(l.q) +
                                            ", q must be >= 1");
            }
            if (l.kernel == 0 || l.kernel % 2 == 0) {
                throw std::invalid_argument("model config: " + where + " kernel must be odd, got " +
                                            std::to_string(l.kernel));
            }
            if (l.channels == 0) {
                throw std::invalid_argument("model config: " + where + " has zero channels");
            }
        }
        if (col.pool_count() != 2) {
            throw std::invalid_argument("model config: column " + std::to_string(ci) + " pools " +
                                        std::to_string(col.pool_count()) + " times, exactly 2 are required");
        }
    }
}

std::size_t DroneNetConfig::fusion_in_channels() const {
    std::size_t n = 0;
    for (const auto& col : columns) {
        n += col.out_channels();
    }
    return n;
}

std::size_t parameter_count(const DroneNetConfig& config) {
    std::size_t total = 0;
    for (const auto& col : config.columns) {
        std::size_t in = config.in_channels;
        for (const auto& l : col.layers) {
            total += static_cast<std::size_t>(l.q) * l.channels * in * l.kernel * l.kernel + l.channels;
            in = l.channels;
        }
    }
    return total + config.fusion_in_channels() + 1;
}

template <typename T>
DroneNet<T>::DroneNet(DroneNetConfig config) : config_(std::move(config)) {
    config_.validate();
    for (const auto& spec : config_.columns) {
        Column<T> col;
        std::size_t in = config_.in_channels;
        for (const auto& l : spec.layers) {
            col.layers.push_back(SelfOnnLayer<T>::zeros(ConvSpec::same(l.kernel, in, l.channels), l.q));
            col.pool_after.push_back(l.pool_after);
            in = l.channels;
        }
        columns_.push_back(std::move(col));
    }
    fusion_.spec = ConvSpec::same(1, config_.fusion_in_channels(), 1);
    fusion_.weight = Tensor<T>(fusion_.spec.weight_shape());
    fusion_.bias = Tensor<T>(fusion_.spec.bias_shape());
}

template <typename T>
std::vector<ParamRef<T>> DroneNet<T>::parameters() {
    std::vector<ParamRef<T>> out;
    const auto names = parameter_names();
    std::size_t k = 0;
    for (auto& col : columns_) {
        for (auto& layer : col.layers) {
            for (auto& w : layer.weights) {
                out.push_back({names[k++], &w});
            }
            out.push_back({names[k++], &layer.bias});
        }
    }
    out.push_back({names[k++], &fusion_.weight});
    out.push_back({names[k++], &fusion_.bias});
    return out;
}

template <typename T>
std::vector<const Tensor<T>*> DroneNet<T>::parameters() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& col : columns_) {
        for (const auto& layer : col.layers) {
            for (const auto& w : layer.weights) {
                out.push_back(&w);
            }
            out.push_back(&layer.bias);
        }
    }
    out.push_back(&fusion_.weight);
    out.push_back(&fusion_.bias);
    return out;
}

template <typename T>
std::vector<std::string> DroneNet<T>::parameter_names() const {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        for (std::size_t l = 0; l < columns_[c].layers.size(); ++l) {
            const std::string base = layer_name(c, l);
            for (int q = 1; q <= columns_[c].layers[l].q_max; ++q) {
                names.push_back(base + ".w" + std::to_string(q));
            }
            names.push_back(base + ".b");
        }
    }
    names.emplace_back("fusion.w");
    names.emplace_back("fusion.b");
    return names;
}

template <typename T>
std::size_t DroneNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) {
        n += p->size();
    }
    return n;
}

template <typename T>
Tensor<T> model_forward(const DroneNet<T>& model, const Tensor<T>& x, std::type_identity_t<ForwardCache<T>>* cache,
                        const ExecOptions& options) {
    const auto& cfg = model.config();
    if (x.shape().c != cfg.in_channels) {
        throw ShapeError("model expects " + std::to_string(cfg.in_channels) + "-channel input, got " +
                         x.shape().str());
    }
    const auto& columns = model.columns();
    std::vector<Tensor<T>> features(columns.size());
    std::vector<std::vector<LayerCache<T>>> layer_caches(columns.size());

    for_each_column(columns.size(), options.threads, [&](std::size_t c) {
        const auto& col = columns[c];
        Tensor<T> h = x;
        for (std::size_t l = 0; l < col.layers.size(); ++l) {
            LayerCache<T> lc;
            Tensor<T> y = tanh_forward(selfonn_forward(col.layers[l], h, options.algo));
            if (options.check_finite) {
                require_finite(y, layer_name(c, l));
            }
            Tensor<T> next;
            if (col.pool_after[l]) {
                auto pooled = maxpool2x2_forward(y);
                next = std::move(pooled.output);
                lc.pool = std::move(pooled.indices);
            } else {
                next = y;
            }
            if (cache != nullptr) {
                lc.input = std::move(h);
                lc.activation = std::move(y);
                layer_caches[c].push_back(std::move(lc));
            }
            h = std::move(next);
        }
        features[c] = std::move(h);
    });

    Tensor<T> fused = concat_channels<T>(features);
    const auto& fusion = model.fusion();
    Tensor<T> pre = conv2d_forward(fused, fusion.weight, fusion.bias, fusion.spec, options.algo);
    if (options.check_finite) {
        require_finite(pre, "fusion");
    }
    Tensor<T> out = relu_forward(pre);
    if (cache != nullptr) {
        cache->input_shape = x.shape();
        cache->columns = std::move(layer_caches);
        cache->fused_input = std::move(fused);
        cache->fusion_pre = std::move(pre);
    }
    return out;
}

template <typename T>
ModelGrads<T> model_backward(const DroneNet<T>& model, const ForwardCache<T>& cache, const Tensor<T>& grad_out,
                             const ExecOptions& options, bool need_input_grad) {
    if (grad_out.shape() != cache.fusion_pre.shape()) {
        throw ShapeError("model_backward: gradient shape " + grad_out.shape().str() + " does not match output " +
                         cache.fusion_pre.shape().str());
    }
    const auto& columns = model.columns();
    const auto& fusion = model.fusion();
    const Tensor<T> g_pre = relu_backward(cache.fusion_pre, grad_out);
    auto fg = conv2d_backward(cache.fused_input, fusion.weight, fusion.spec, g_pre, options.algo, true);

    std::vector<std::size_t> split;
    for (const auto& col : model.config().columns) {
        split.push_back(col.out_channels());
    }
    std::vector<Tensor<T>> g_cols = split_channels(fg.grad_x, std::span<const std::size_t>(split));

    // per column: for each layer, q weight grads then bias grad
    std::vector<std::vector<Tensor<T>>> col_grads(columns.size());
    std::vector<Tensor<T>> input_grads(columns.size());

    for_each_column(columns.size(), options.threads, [&](std::size_t c) {
        const auto& col = columns[c];
        const auto& lcs = cache.columns[c];
        std::vector<SelfOnnGrads<T>> per_layer(col.layers.size());
        Tensor<T> g = std::move(g_cols[c]);
        for (std::size_t l = col.layers.size(); l-- > 0;) {
            if (col.pool_after[l]) {
                g = maxpool2x2_backward(g, lcs[l].pool);
            }
            g = tanh_backward(lcs[l].activation, g);
            const bool want_x = l > 0 || need_input_grad;
            per_layer[l] = selfonn_backward(col.layers[l], lcs[l].input, g, options.algo, want_x);
            g = std::move(per_layer[l].grad_x);
        }
        if (need_input_grad) {
            input_grads[c] = std::move(g);
        }
        for (auto& lg : per_layer) {
            for (auto& w : lg.grad_w) {
                col_grads[c].push_back(std::move(w));
            }
            col_grads[c].push_back(std::move(lg.grad_b));
        }
    });

    ModelGrads<T> out;
    for (auto& cg : col_grads) {
        for (auto& t : cg) {
            out.params.push_back(std::move(t));
        }
    }
    out.params.push_back(std::move(fg.grad_w));
    out.params.push_back(std::move(fg.grad_b));
    if (need_input_grad) {
        out.input = Tensor<T>(cache.input_shape);
        for (const auto& g : input_grads) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                out.input[i] += g[i];
            }
        }
    }
    return out;
}

template <typename T>
void init_weights(DroneNet<T>& model, std::uint64_t seed, WeightInit scheme) {
    Rng rng(derive_seed(seed, 0));
    auto init_bank = [&](Tensor<T>& w) {
        if (scheme == WeightInit::Gaussian) {
            for (auto& v : w.data()) {
                v = static_cast<T>(kInitStd * rng.normal());
            }
            return;
        }
        const Shape& s = w.shape();
        const double fan_in = static_cast<double>(s.c * s.h * s.w);
        const double fan_out = static_cast<double>(s.n * s.h * s.w);
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : w.data()) {
            v = static_cast<T>(rng.uniform(-a, a));
        }
    };
    for (auto& col : model.columns()) {
        for (auto& layer : col.layers) {
            for (auto& w : layer.weights) {
                init_bank(w);
            }
            layer.bias.fill(T{0});
        }
    }
    init_bank(model.fusion().weight);
    model.fusion().bias.fill(T{0});
}

template class DroneNet<float>;
template class DroneNet<double>;
template Tensor<float> model_forward(const DroneNet<float>&, const Tensor<float>&, ForwardCache<float>*,
                                     const ExecOptions&);
template Tensor<double> model_forward(const DroneNet<double>&, const Tensor<double>&, ForwardCache<double>*,
                                      const ExecOptions&);
template ModelGrads<float> model_backward(const DroneNet<float>&, const ForwardCache<float>&, const Tensor<float>&,
                                          const ExecOptions&, bool);
template ModelGrads<double> model_backward(const DroneNet<double>&, const ForwardCache<double>&,
                                           const Tensor<double>&, const ExecOptions&, bool);
template void init_weights(DroneNet<float>&, std::uint64_t, WeightInit);
template void init_weights(DroneNet<double>&, std::uint64_t, WeightInit);

} // namespace dronenet
