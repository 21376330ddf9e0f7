#include "vdpu/passes.hpp"

#include <cmath>

#include "vdpu/error.hpp"

namespace vdpu {

bool has_batchnorm(const ModelGraph& graph) {
    for (const auto& l : graph.layers())
        if (l.kind() == LayerKind::batchnorm) return true;
    return false;
}

ModelGraph fold_batchnorm(const ModelGraph& graph) {
    std::vector<Layer> out;
    std::vector<std::string> diags;
    for (const auto& layer : graph.layers()) {
        const auto* bn = std::get_if<BatchNormSpec>(&layer.spec);
        if (!bn) {
            out.push_back(layer);
            continue;
        }
        auto* conv = out.empty() ? nullptr : std::get_if<ConvSpec>(&out.back().spec);
        if (!conv || conv->fused_relu) {
            diags.push_back("batchnorm '" + layer.id + "' is not directly preceded by a conv2d");
            continue;
        }
        const auto per_out = static_cast<std::size_t>(conv->c_in) * conv->k * conv->k;
        std::vector<float> bias = conv->bias.empty() ? std::vector<float>(static_cast<std::size_t>(conv->c_out), 0.0f)
                                                     : conv->bias;
        for (std::size_t co = 0; co < static_cast<std::size_t>(conv->c_out); ++co) {
            const float scale = bn->gamma[co] / std::sqrt(bn->var[co] + bn->eps);
            for (std::size_t i = 0; i < per_out; ++i) conv->weights[co * per_out + i] *= scale;
            bias[co] = (bias[co] - bn->mean[co]) * scale + bn->beta[co];
        }
        conv->bias = std::move(bias);
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return ModelGraph::create(graph.name(), graph.input_shape(), std::move(out));
}

ModelGraph fuse_relu(const ModelGraph& graph) {
    std::vector<Layer> out;
    for (const auto& layer : graph.layers()) {
        if (layer.kind() == LayerKind::relu && !out.empty()) {
            if (auto* conv = std::get_if<ConvSpec>(&out.back().spec); conv && !conv->fused_relu) {
                conv->fused_relu = true;
                continue;
            }
        }
        out.push_back(layer);
    }
    return ModelGraph::create(graph.name(), graph.input_shape(), std::move(out));
}

std::size_t Partition::accelerator_subgraphs() const {
    std::size_t n = 0;
    for (const auto& s : segments)
        if (s.device == Device::accelerator) ++n;
    return n;
}

Partition partition(const std::vector<ChainEntry>& chain, const std::set<LayerKind>& supported) {
    Partition p;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const Device d = supported.contains(chain[i].kind) ? Device::accelerator : Device::host;
        if (d == Device::host) p.offenders.push_back(chain[i].id);
        if (p.segments.empty() || p.segments.back().device != d) p.segments.push_back({d, {}});
        p.segments.back().layers.push_back(i);
    }
    return p;
}

Partition partition(const ModelGraph& graph, const std::set<LayerKind>& supported) {
    std::vector<ChainEntry> chain;
    for (const auto& l : graph.layers()) chain.push_back({l.id, l.kind()});
    return partition(chain, supported);
}

}  // namespace vdpu
