#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vdpu/graph.hpp"
#include "vdpu/model_io.hpp"
#include "vdpu/tensor.hpp"

namespace vdpu {

/// Symmetric signed 8-bit power-of-two quantization: q = round(x * 2^f),
/// representable range [-128 * 2^-f, 127 * 2^-f].
struct QuantParams {
    static constexpr int bit_width = 8;
    static constexpr bool is_signed = true;

    int fraction_bits = 7;

    double scale() const { return std::ldexp(1.0, -fraction_bits); }
    double max_representable() const { return 127.0 * scale(); }
    double min_representable() const { return -128.0 * scale(); }

    friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Largest f with max_abs * 2^f <= 127. An all-zero tensor (max_abs == 0) gets f = 7.
int fraction_bits_for(double max_abs);

struct ClipStats {
    std::int64_t clipped = 0;
    std::int64_t total = 0;

    double rate() const { return total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total); }
    ClipStats& operator+=(const ClipStats& o) {
        clipped += o.clipped;
        total += o.total;
        return *this;
    }
};

/// clamp(round_half_to_even(x * 2^f), -128, 127).
std::int8_t quantize_value(float x, int fraction_bits, bool* clipped = nullptr);
TensorI8 quantize_tensor(const TensorF32& x, QuantParams p, ClipStats* stats = nullptr);
TensorF32 dequantize_tensor(const TensorI8& q, QuantParams p);

struct CalibrationSet {
    std::vector<TensorF32> images;
    std::string dataset_id = "unnamed";

    std::size_t count() const noexcept { return images.size(); }
};

/// Tensor names: "input" for the model input, a layer id for that layer's
/// output activation, "<id>.weight" for conv/dense weights.
struct Calibration {
    std::map<std::string, QuantParams> params;
    std::map<std::string, double> max_abs;
    std::string dataset_id;
    std::size_t image_count = 0;
    std::size_t batch = 1;
};

/// Max-abs calibration over a batchnorm-free graph. Images are consumed in
/// groups of `batch`; the statistics do not depend on the grouping. relu and
/// maxpool outputs inherit their input's parameters. `threads` > 1 spreads
/// batches over worker threads.
Calibration calibrate(const ModelGraph& graph, const CalibrationSet& cal, std::size_t batch,
                      unsigned threads = 1);

struct QConv {
    int k = 1, s = 1, pad = 0, c_in = 1, c_out = 1;
    std::vector<std::int8_t> weights;  // [c_out, c_in, k, k]
    std::vector<std::int32_t> bias;    // [c_out] at scale 2^-(f_in + f_w)
    int weight_bits = 0;               // f_w
    int shift = 0;                     // f_in + f_w - f_out
    bool fused_relu = false;

    friend bool operator==(const QConv&, const QConv&) = default;
};

struct QDense {
    int in = 1, out = 1;
    std::vector<std::int8_t> weights;  // [out, in]
    std::vector<std::int32_t> bias;
    int weight_bits = 0;
    int shift = 0;

    friend bool operator==(const QDense&, const QDense&) = default;
};

struct QRelu {
    friend bool operator==(const QRelu&, const QRelu&) = default;
};
struct QMaxPool {
    int k = 2, s = 2;
    friend bool operator==(const QMaxPool&, const QMaxPool&) = default;
};
struct QGlobalAvgPool {
    friend bool operator==(const QGlobalAvgPool&, const QGlobalAvgPool&) = default;
};
/// Executed on the host: dequantize, FP32 softmax, requantize.
struct QSoftmax {
    friend bool operator==(const QSoftmax&, const QSoftmax&) = default;
};

using QLayerSpec = std::variant<QConv, QDense, QRelu, QMaxPool, QGlobalAvgPool, QSoftmax>;

LayerKind kind_of(const QLayerSpec& spec) noexcept;

struct QLayer {
    std::string id;
    QLayerSpec spec;
    QuantParams out;       // parameters of this layer's output activation
    TensorShape out_shape;

    LayerKind kind() const noexcept { return kind_of(spec); }
    friend bool operator==(const QLayer&, const QLayer&) = default;
};

struct QuantizedModel {
    std::string name;
    TensorShape input_shape;
    QuantParams input;
    std::vector<QLayer> layers;
    std::string calibration_dataset;
    std::size_t calibration_images = 0;
    std::size_t calibration_batch = 1;
    /// Export batch size; always 1 for a written model.
    int batch_size = 1;

    QuantParams input_params_of(std::size_t i) const { return i == 0 ? input : layers.at(i - 1).out; }
    TensorShape input_shape_of(std::size_t i) const { return i == 0 ? input_shape : layers.at(i - 1).out_shape; }
    /// Index where the trailing run of host-executed softmax layers starts.
    std::size_t host_tail_begin() const;

    friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

/// Requires a batchnorm-free graph and parameters for every tensor.
QuantizedModel quantize_model(const ModelGraph& folded_graph, const Calibration& calibration);

/// Folds batchnorm, calibrates and quantizes in one call.
QuantizedModel quantize_graph(const ModelGraph& graph, const CalibrationSet& cal, std::size_t batch,
                              unsigned threads = 1);

QuantizedModel fuse_relu(const QuantizedModel& model);

/// INT8 semantics of one layer. Conv and dense accumulate INT8 x INT8 into a
/// checked INT32 accumulator seeded with the bias, then requantize by
/// round_half_to_even(acc * 2^-shift) and clamp.
TensorI8 execute_qlayer(const QLayer& layer, QuantParams in_params, const TensorI8& input,
                        ClipStats* stats = nullptr);

struct QForwardResult {
    int class_index = 0;
    TensorI8 output;  // output of the last accelerator-side layer (host softmax tail excluded)
    ClipStats clips;  // saturations in input quantization and requantization
};

QForwardResult qforward(const QuantizedModel& model, const TensorF32& image);

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels);
double accuracy_eval(const ModelGraph& graph, std::span<const TensorF32> images, std::span<const int> labels);
double accuracy_eval(const QuantizedModel& model, std::span<const TensorF32> images, std::span<const int> labels);

Document serialize_qmodel(const QuantizedModel& model);
QuantizedModel deserialize_qmodel(const Document& doc);
json qmodel_manifest(const QuantizedModel& model, BlobWriter& blob);
QuantizedModel qmodel_from_manifest(const json& manifest, const BlobReader& blob);

QuantizedModel load_qmodel(const std::filesystem::path& manifest_path);
void save_qmodel(const QuantizedModel& model, const std::filesystem::path& manifest_path);

}  // namespace vdpu
