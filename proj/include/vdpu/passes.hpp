#pragma once

#include <set>
#include <string>
#include <vector>

#include "vdpu/graph.hpp"

namespace vdpu {

/// Absorbs every batchnorm into the conv2d directly before it:
/// W' = W * gamma / sqrt(var + eps) per output channel,
/// b' = (b - mean) * gamma / sqrt(var + eps) + beta.
/// Throws ValidationError listing each batchnorm that has no preceding conv.
ModelGraph fold_batchnorm(const ModelGraph& graph);

/// Marks each conv2d whose sole consumer is a relu as fused and drops the relu.
ModelGraph fuse_relu(const ModelGraph& graph);

bool has_batchnorm(const ModelGraph& graph);

enum class Device { accelerator, host };

struct Segment {
    Device device = Device::accelerator;
    std::vector<std::size_t> layers;  // indices into the chain
};

struct Partition {
    /// Maximal runs in chain order; concatenating them yields the original chain.
    std::vector<Segment> segments;
    /// Ids of layers the accelerator does not support, in chain order.
    std::vector<std::string> offenders;

    std::size_t accelerator_subgraphs() const;
};

struct ChainEntry {
    std::string id;
    LayerKind kind;
};

Partition partition(const std::vector<ChainEntry>& chain, const std::set<LayerKind>& supported);
Partition partition(const ModelGraph& graph, const std::set<LayerKind>& supported);

}  // namespace vdpu
