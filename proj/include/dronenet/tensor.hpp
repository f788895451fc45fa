#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dronenet {

/// Extents of a rank-4 tensor in batch, channel, height, width order.
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    [[nodiscard]] constexpr std::size_t size() const noexcept { return n * c * h * w; }
    [[nodiscard]] constexpr std::size_t plane() const noexcept { return h * w; }
    [[nodiscard]] std::string str() const;

    friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor, row-major and contiguous. The scalar type fixes the precision:
/// float for training and inference, double for gradient verification.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0});
    Tensor(Shape shape, std::vector<T> data);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
    [[nodiscard]] T* ptr() noexcept { return data_.data(); }
    [[nodiscard]] const T* ptr() const noexcept { return data_.data(); }

    [[nodiscard]] std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
        return data_[index(n, c, h, w)];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
        return data_[index(n, c, h, w)];
    }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Pointer to the start of the (n, c) plane.
    [[nodiscard]] T* plane(std::size_t n, std::size_t c) noexcept { return data_.data() + index(n, c, 0, 0); }
    [[nodiscard]] const T* plane(std::size_t n, std::size_t c) const noexcept {
        return data_.data() + index(n, c, 0, 0);
    }

    void fill(T value);

    /// True when no element is NaN or infinite.
    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] T sum() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<T> data_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& x) {
    std::vector<To> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = static_cast<To>(x[i]);
    }
    return Tensor<To>(x.shape(), std::move(out));
}

} // namespace dronenet
