#pragma once

#include <optional>
#include <vector>

#include "vdpu/graph.hpp"
#include "vdpu/tensor.hpp"

namespace vdpu {

// FP32 reference kernels. Every kernel accumulates in a fixed order so results
// are bit-stable; conv sums over (c_in, kernel row, kernel col) before adding bias.

TensorF32 conv2d_fp32(const TensorF32& input, const ConvSpec& spec);
TensorF32 batchnorm_fp32(const TensorF32& input, const BatchNormSpec& spec);
TensorF32 relu_fp32(const TensorF32& input);
TensorF32 maxpool_fp32(const TensorF32& input, const MaxPoolSpec& spec);
TensorF32 globalavgpool_fp32(const TensorF32& input);
TensorF32 dense_fp32(const TensorF32& input, const DenseSpec& spec);
/// Per image over the flattened (c, h, w) values, stabilized by max subtraction.
TensorF32 softmax_fp32(const TensorF32& input);

TensorF32 apply_layer(const LayerSpec& spec, const TensorF32& input);

struct ExecutionTrace {
    /// Output of each layer in topological order (only when retention was requested).
    std::vector<TensorF32> outputs;
};

TensorF32 forward(const ModelGraph& graph, const TensorF32& input, ExecutionTrace* trace = nullptr);

/// Index of the largest element; ties resolve to the lowest index.
int argmax(std::span<const float> values);
int argmax(std::span<const std::int8_t> values);

/// Class index for a single image; the graph must produce a length-10 vector.
int predict(const ModelGraph& graph, const TensorF32& image);

}  // namespace vdpu
