#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vdpu/tensor.hpp"

namespace vdpu {

enum class LayerKind { conv2d, batchnorm, relu, maxpool, globalavgpool, dense, softmax };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// Square-kernel cross-correlation. Weights are [c_out, c_in, k, k]; an empty
/// bias means the layer has none.
struct ConvSpec {
    int k = 3;
    int s = 1;
    int pad = 0;
    int c_in = 1;
    int c_out = 1;
    std::vector<float> weights;
    std::vector<float> bias;
    bool fused_relu = false;

    std::int64_t weight_count() const noexcept {
        return static_cast<std::int64_t>(c_out) * c_in * k * k;
    }
    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct BatchNormSpec {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> mean;
    std::vector<float> var;
    float eps = 1e-5f;

    friend bool operator==(const BatchNormSpec&, const BatchNormSpec&) = default;
};

struct ReluSpec {
    friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

struct MaxPoolSpec {
    int k = 2;
    int s = 2;
    friend bool operator==(const MaxPoolSpec&, const MaxPoolSpec&) = default;
};

struct GlobalAvgPoolSpec {
    friend bool operator==(const GlobalAvgPoolSpec&, const GlobalAvgPoolSpec&) = default;
};

/// Fully connected layer over the flattened (c, h, w) input. Weights are [out, in].
struct DenseSpec {
    int in = 1;
    int out = 1;
    std::vector<float> weights;
    std::vector<float> bias;

    friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

struct SoftmaxSpec {
    friend bool operator==(const SoftmaxSpec&, const SoftmaxSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, BatchNormSpec, ReluSpec, MaxPoolSpec, GlobalAvgPoolSpec,
                               DenseSpec, SoftmaxSpec>;

LayerKind kind_of(const LayerSpec& spec) noexcept;

struct Layer {
    std::string id;
    LayerSpec spec;

    LayerKind kind() const noexcept { return kind_of(spec); }
    friend bool operator==(const Layer&, const Layer&) = default;
};

using Edge = std::pair<std::string, std::string>;

/// Output shape of a single layer, or a diagnostic when the input does not fit.
struct ShapeResult {
    TensorShape shape;
    std::string error;
    bool ok() const noexcept { return error.empty(); }
};

ShapeResult infer_shape(const LayerSpec& spec, const TensorShape& input);

/// Validated linear chain of layers. Immutable once built; `layers()` is in
/// topological order and `output_shape(i)` is the activation leaving layer i.
class ModelGraph {
public:
    /// Validates topology, payload sizes and shape propagation. Throws
    /// ValidationError listing every problem found. Empty `edges` means the
    /// layers form a chain in the given order.
    static ModelGraph create(std::string name, TensorShape input_shape, std::vector<Layer> layers,
                             std::vector<Edge> edges = {});

    const std::string& name() const noexcept { return name_; }
    const TensorShape& input_shape() const noexcept { return input_shape_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t size() const noexcept { return layers_.size(); }

    const TensorShape& output_shape(std::size_t i) const { return shapes_.at(i); }
    const TensorShape& input_shape_of(std::size_t i) const {
        return i == 0 ? input_shape_ : shapes_.at(i - 1);
    }
    const TensorShape& final_shape() const {
        return shapes_.empty() ? input_shape_ : shapes_.back();
    }

    /// Index of the layer with the given id, or -1.
    int find(const std::string& id) const noexcept;

    friend bool operator==(const ModelGraph&, const ModelGraph&) = default;

private:
    ModelGraph() = default;

    std::string name_;
    TensorShape input_shape_{};
    std::vector<Layer> layers_;
    std::vector<Edge> edges_;
    std::vector<TensorShape> shapes_;
};

/// Every stored scalar parameter: weights, biases, and the four batchnorm vectors.
std::int64_t count_params(const ModelGraph& graph);
std::int64_t count_params(const LayerSpec& spec);

/// Operation counts split by category. One multiply-accumulate counts as two
/// operations. Elementwise layers (relu, batchnorm, softmax) count one op per
/// element; max pooling counts k*k per output element and global average
/// pooling one per input element.
struct OpCounts {
    std::int64_t conv = 0;
    std::int64_t dense = 0;
    std::int64_t eltwise = 0;
    std::int64_t pool = 0;

    std::int64_t total() const noexcept { return conv + dense + eltwise + pool; }
    OpCounts& operator+=(const OpCounts& o) noexcept {
        conv += o.conv;
        dense += o.dense;
        eltwise += o.eltwise;
        pool += o.pool;
        return *this;
    }
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

OpCounts count_layer_ops(const LayerSpec& spec, const TensorShape& input);

struct GraphOps {
    std::vector<OpCounts> per_layer;
    OpCounts total;
};

/// `input` overrides the batch dimension of the graph's input shape.
GraphOps count_ops(const ModelGraph& graph, const TensorShape& input);
GraphOps count_ops(const ModelGraph& graph);

}  // namespace vdpu
