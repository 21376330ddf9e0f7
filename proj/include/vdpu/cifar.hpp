#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vdpu/tensor.hpp"

namespace vdpu {

/// One record: label byte, then 1024 R, 1024 G, 1024 B bytes (row-major 32x32).
inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr int kCifarClasses = 10;

struct Cifar10Batch {
    std::vector<TensorF32> images;  // 1x3x32x32, pixel p -> p / 255
    std::vector<int> labels;

    std::size_t count() const noexcept { return images.size(); }
};

Cifar10Batch parse_cifar10(std::span<const std::uint8_t> bytes);
Cifar10Batch load_cifar10(const std::filesystem::path& path);

/// Inverse of parse_cifar10; pixels are rounded back to bytes.
std::vector<std::uint8_t> encode_cifar10(const Cifar10Batch& batch);
void write_cifar10(const Cifar10Batch& batch, const std::filesystem::path& path);

/// Random images in CIFAR-10 layout: a per-image smooth gradient plus pixel
/// noise, so activations are not pure white noise. Labels are uniform.
Cifar10Batch synthetic_cifar10(std::size_t count, std::uint64_t seed);

}  // namespace vdpu
