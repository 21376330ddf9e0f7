#include "vdpu/tensor.hpp"

#include <sstream>

#include "vdpu/error.hpp"

namespace vdpu {

const char* to_string(DType dtype) {
    switch (dtype) {
        case DType::fp32: return "fp32";
        case DType::int8: return "int8";
        case DType::int32: return "int32";
    }
    return "?";
}

DType dtype_from_string(const std::string& name) {
    if (name == "fp32") return DType::fp32;
    if (name == "int8") return DType::int8;
    if (name == "int32") return DType::int32;
    throw FormatError("unknown dtype '" + name + "'");
}

std::ostream& operator<<(std::ostream& os, const TensorShape& s) {
    return os << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w;
}

std::string to_string(const TensorShape& s) {
    std::ostringstream os;
    os << s;
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(TensorShape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (!shape_.valid()) throw ValidationError("tensor shape " + to_string(shape_) + " has a dimension < 1");
    if (static_cast<std::int64_t>(data_.size()) != shape_.elements()) {
        throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + to_string(shape_));
    }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(TensorShape shape) const {
    return Tensor<T>(shape, data_);
}

template class Tensor<float>;
template class Tensor<std::int8_t>;
template class Tensor<std::int32_t>;

}  // namespace vdpu
