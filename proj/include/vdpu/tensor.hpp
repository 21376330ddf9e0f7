#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace vdpu {

enum class DType { fp32, int8, int32 };

const char* to_string(DType dtype);
DType dtype_from_string(const std::string& name);

/// Activation shape in (n, c, h, w) order. Every dimension is at least 1.
struct TensorShape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::int64_t elements() const noexcept {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    std::int64_t per_image() const noexcept { return static_cast<std::int64_t>(c) * h * w; }
    bool valid() const noexcept { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }

    friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::ostream& operator<<(std::ostream& os, const TensorShape& s);
std::string to_string(const TensorShape& s);

template <typename T>
struct DTypeOf;
template <>
struct DTypeOf<float> {
    static constexpr DType value = DType::fp32;
};
template <>
struct DTypeOf<std::int8_t> {
    static constexpr DType value = DType::int8;
};
template <>
struct DTypeOf<std::int32_t> {
    static constexpr DType value = DType::int32;
};

/// Dense row-major (n, c, h, w) tensor.
template <typename T>
class Tensor {
public:
    using value_type = T;
    static constexpr DType dtype = DTypeOf<T>::value;

    Tensor() = default;
    explicit Tensor(TensorShape shape, T fill = T{})
        : shape_(shape), data_(static_cast<std::size_t>(shape.elements()), fill) {}
    Tensor(TensorShape shape, std::vector<T> data);

    const TensorShape& shape() const noexcept { return shape_; }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    /// Same data, new shape with equal element count.
    Tensor reshaped(TensorShape shape) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    TensorShape shape_{};
    std::vector<T> data_;
};

using TensorF32 = Tensor<float>;
using TensorI8 = Tensor<std::int8_t>;
using TensorI32 = Tensor<std::int32_t>;

extern template class Tensor<float>;
extern template class Tensor<std::int8_t>;
extern template class Tensor<std::int32_t>;

}  // namespace vdpu
