#include "vdpu/cifar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "vdpu/error.hpp"
#include "vdpu/random.hpp"

namespace vdpu {

namespace {
constexpr int kSide = 32;
constexpr std::size_t kPlane = kSide * kSide;
}  // namespace

Cifar10Batch parse_cifar10(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kCifarRecordBytes != 0)
        throw FormatError("CIFAR-10 data of " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
                          std::to_string(kCifarRecordBytes));
    const std::size_t n = bytes.size() / kCifarRecordBytes;
    Cifar10Batch batch;
    batch.images.reserve(n);
    batch.labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto rec = bytes.subspan(r * kCifarRecordBytes, kCifarRecordBytes);
        if (rec[0] > 9)
            throw FormatError("CIFAR-10 record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
        TensorF32 img({1, 3, kSide, kSide});
        auto out = img.data();
        for (std::size_t i = 0; i < 3 * kPlane; ++i) out[i] = static_cast<float>(rec[1 + i]) / 255.0f;
        batch.images.push_back(std::move(img));
        batch.labels.push_back(rec[0]);
    }
    return batch;
}

Cifar10Batch load_cifar10(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open CIFAR-10 file " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_cifar10(bytes);
}

std::vector<std::uint8_t> encode_cifar10(const Cifar10Batch& batch) {
    if (batch.labels.size() != batch.images.size()) throw ValidationError("label count does not match image count");
    std::vector<std::uint8_t> out;
    out.reserve(batch.count() * kCifarRecordBytes);
    for (std::size_t r = 0; r < batch.count(); ++r) {
        const auto& img = batch.images[r];
        if (img.shape() != TensorShape{1, 3, kSide, kSide})
            throw ValidationError("CIFAR-10 images must be 1x3x32x32, got " + to_string(img.shape()));
        const int label = batch.labels[r];
        if (label < 0 || label > 9) throw ValidationError("label out of range: " + std::to_string(label));
        out.push_back(static_cast<std::uint8_t>(label));
        for (float v : img.data()) {
            const double p = std::nearbyint(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0);
            out.push_back(static_cast<std::uint8_t>(p));
        }
    }
    return out;
}

void write_cifar10(const Cifar10Batch& batch, const std::filesystem::path& path) {
    const auto bytes = encode_cifar10(batch);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Cifar10Batch synthetic_cifar10(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    Cifar10Batch batch;
    for (std::size_t r = 0; r < count; ++r) {
        TensorF32 img({1, 3, kSide, kSide});
        for (int c = 0; c < 3; ++c) {
            const double base = rng.uniform(0.1, 0.9);
            const double gx = rng.uniform(-0.4, 0.4);
            const double gy = rng.uniform(-0.4, 0.4);
            for (int h = 0; h < kSide; ++h)
                for (int w = 0; w < kSide; ++w) {
                    const double v = base + gx * (w / 31.0 - 0.5) + gy * (h / 31.0 - 0.5) + rng.uniform(-0.15, 0.15);
                    // snap to the byte grid so the batch survives an encode/parse roundtrip
                    img.at(0, c, h, w) = static_cast<float>(std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f;
                }
        }
        batch.images.push_back(std::move(img));
        batch.labels.push_back(static_cast<int>(rng.uniform_int(0, kCifarClasses - 1)));
    }
    return batch;
}

}  // namespace vdpu
