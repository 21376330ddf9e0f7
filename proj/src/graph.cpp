#include "vdpu/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "vdpu/error.hpp"

namespace vdpu {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string sz(std::size_t v) { return std::to_string(v); }

void check_payload(const Layer& layer, const TensorShape& in, std::vector<std::string>& diags) {
    const std::string where = "layer '" + layer.id + "': ";
    std::visit(overloaded{
                   [&](const ConvSpec& c) {
                       if (c.k != 1 && c.k != 3 && c.k != 5)
                           diags.push_back(where + "kernel size " + std::to_string(c.k) + " not in {1,3,5}");
                       if (c.s != 1 && c.s != 2)
                           diags.push_back(where + "stride " + std::to_string(c.s) + " not in {1,2}");
                       if (c.pad < 0) diags.push_back(where + "negative padding");
                       if (c.c_in < 1 || c.c_out < 1) diags.push_back(where + "channel counts must be >= 1");
                       if (static_cast<std::int64_t>(c.weights.size()) != c.weight_count())
                           diags.push_back(where + "weight payload has " + sz(c.weights.size()) +
                                           " values, expected " + std::to_string(c.weight_count()));
                       if (!c.bias.empty() && static_cast<int>(c.bias.size()) != c.c_out)
                           diags.push_back(where + "bias payload has " + sz(c.bias.size()) + " values, expected " +
                                           std::to_string(c.c_out));
                   },
                   [&](const BatchNormSpec& b) {
                       const auto c = static_cast<std::size_t>(in.c);
                       if (b.gamma.size() != c || b.beta.size() != c || b.mean.size() != c || b.var.size() != c)
                           diags.push_back(where + "batchnorm parameter vectors must have " + sz(c) + " entries");
                       if (std::any_of(b.var.begin(), b.var.end(), [](float v) { return !(v >= 0.0f); }))
                           diags.push_back(where + "batchnorm variance must be >= 0");
                       if (!(b.eps >= 0.0f)) diags.push_back(where + "batchnorm eps must be >= 0");
                       for (std::size_t i = 0; i < b.var.size(); ++i)
                           if (!(b.var[i] + b.eps > 0.0f)) {
                               diags.push_back(where + "batchnorm variance + eps must be > 0");
                               break;
                           }
                   },
                   [&](const DenseSpec& d) {
                       if (d.in < 1 || d.out < 1) diags.push_back(where + "dense sizes must be >= 1");
                       if (d.weights.size() != static_cast<std::size_t>(d.in) * static_cast<std::size_t>(d.out))
                           diags.push_back(where + "weight payload has " + sz(d.weights.size()) +
                                           " values, expected " +
                                           std::to_string(static_cast<std::int64_t>(d.in) * d.out));
                       if (!d.bias.empty() && static_cast<int>(d.bias.size()) != d.out)
                           diags.push_back(where + "bias payload has " + sz(d.bias.size()) + " values, expected " +
                                           std::to_string(d.out));
                   },
                   [&](const MaxPoolSpec& p) {
                       if (p.k < 1 || p.s < 1) diags.push_back(where + "pool kernel and stride must be >= 1");
                   },
                   [](const auto&) {},
               },
               layer.spec);
}

}  // namespace

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::globalavgpool: return "globalavgpool";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
    static const std::map<std::string, LayerKind> kinds = {
        {"conv2d", LayerKind::conv2d},   {"batchnorm", LayerKind::batchnorm},
        {"relu", LayerKind::relu},       {"maxpool", LayerKind::maxpool},
        {"globalavgpool", LayerKind::globalavgpool},
        {"dense", LayerKind::dense},     {"softmax", LayerKind::softmax},
    };
    auto it = kinds.find(name);
    if (it == kinds.end()) throw ValidationError("unknown layer kind '" + name + "'");
    return it->second;
}

LayerKind kind_of(const LayerSpec& spec) noexcept {
    return static_cast<LayerKind>(spec.index());
}

ShapeResult infer_shape(const LayerSpec& spec, const TensorShape& in) {
    return std::visit(
        overloaded{
            [&](const ConvSpec& c) -> ShapeResult {
                if (in.c != c.c_in)
                    return {in, "input has " + std::to_string(in.c) + " channels, conv expects " +
                                    std::to_string(c.c_in)};
                const int hp = in.h + 2 * c.pad;
                const int wp = in.w + 2 * c.pad;
                if (c.s < 1 || hp < c.k || wp < c.k)
                    return {in, "conv output dimension < 1 for input " + to_string(in)};
                return {{in.n, c.c_out, (hp - c.k) / c.s + 1, (wp - c.k) / c.s + 1}, {}};
            },
            [&](const BatchNormSpec&) -> ShapeResult { return {in, {}}; },
            [&](const ReluSpec&) -> ShapeResult { return {in, {}}; },
            [&](const SoftmaxSpec&) -> ShapeResult { return {in, {}}; },
            [&](const MaxPoolSpec& p) -> ShapeResult {
                if (p.s < 1 || p.k > in.h || p.k > in.w)
                    return {in, "pool window " + std::to_string(p.k) + " exceeds input " + to_string(in)};
                return {{in.n, in.c, (in.h - p.k) / p.s + 1, (in.w - p.k) / p.s + 1}, {}};
            },
            [&](const GlobalAvgPoolSpec&) -> ShapeResult { return {{in.n, in.c, 1, 1}, {}}; },
            [&](const DenseSpec& d) -> ShapeResult {
                if (in.per_image() != d.in)
                    return {{in.n, d.out, 1, 1},
                            "dense expects " + std::to_string(d.in) + " inputs, got " +
                                std::to_string(in.per_image())};
                return {{in.n, d.out, 1, 1}, {}};
            },
        },
        spec);
}

ModelGraph ModelGraph::create(std::string name, TensorShape input_shape, std::vector<Layer> layers,
                              std::vector<Edge> edges) {
    std::vector<std::string> diags;
    if (!input_shape.valid()) diags.push_back("input shape " + to_string(input_shape) + " has a dimension < 1");
    if (layers.empty()) diags.push_back("graph has no layers");

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].id.empty()) diags.push_back("layer #" + sz(i) + " has an empty id");
        if (!index.emplace(layers[i].id, i).second) diags.push_back("duplicate layer id '" + layers[i].id + "'");
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));

    if (edges.empty()) {
        for (std::size_t i = 1; i < layers.size(); ++i) edges.emplace_back(layers[i - 1].id, layers[i].id);
    }

    // Topology: every layer has at most one producer and one consumer, no cycles,
    // a single entry layer.
    const std::size_t n = layers.size();
    std::vector<int> producer(n, -1);
    std::vector<std::vector<std::size_t>> consumers(n);
    std::set<Edge> seen;
    for (const auto& [from, to] : edges) {
        auto f = index.find(from);
        auto t = index.find(to);
        if (f == index.end() || t == index.end()) {
            diags.push_back("edge " + from + "->" + to + " references an unknown layer");
            continue;
        }
        if (!seen.insert({from, to}).second) continue;
        if (f->second == t->second) {
            diags.push_back("cycle detected: self edge on '" + from + "'");
            continue;
        }
        if (producer[t->second] != -1)
            diags.push_back("layer '" + to + "' has more than one producer (branching graphs are not supported)");
        else
            producer[t->second] = static_cast<int>(f->second);
        consumers[f->second].push_back(t->second);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (consumers[i].size() > 1)
            diags.push_back("layer '" + layers[i].id + "' feeds more than one consumer (branching graphs are not supported)");
    }

    // Kahn's algorithm over the recorded edges.
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (auto c : consumers[i]) ++indegree[c];
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const auto cur = ready.front();
        ready.erase(ready.begin());
        order.push_back(cur);
        for (auto c : consumers[cur])
            if (--indegree[c] == 0) ready.push_back(c);
    }
    if (order.size() != n) {
        std::string members;
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + layers[i].id;
        diags.push_back("cycle detected among layers: " + members);
    }
    const auto entries = std::count(producer.begin(), producer.end(), -1);
    if (order.size() == n && entries != 1)
        diags.push_back("graph must have exactly one entry layer, found " + std::to_string(entries));
    if (!diags.empty()) throw ValidationError(std::move(diags));

    ModelGraph g;
    g.name_ = std::move(name);
    g.input_shape_ = input_shape;
    g.layers_.reserve(n);
    for (auto i : order) g.layers_.push_back(std::move(layers[i]));
    for (std::size_t i = 1; i < n; ++i) g.edges_.emplace_back(g.layers_[i - 1].id, g.layers_[i].id);

    TensorShape cur = input_shape;
    for (const auto& layer : g.layers_) {
        check_payload(layer, cur, diags);
        auto r = infer_shape(layer.spec, cur);
        if (!r.ok()) diags.push_back("layer '" + layer.id + "': " + r.error);
        cur = r.shape;
        g.shapes_.push_back(cur);
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return g;
}

int ModelGraph::find(const std::string& id) const noexcept {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].id == id) return static_cast<int>(i);
    return -1;
}

std::int64_t count_params(const LayerSpec& spec) {
    return std::visit(overloaded{
                          [](const ConvSpec& c) -> std::int64_t {
                              return static_cast<std::int64_t>(c.weights.size() + c.bias.size());
                          },
                          [](const DenseSpec& d) -> std::int64_t {
                              return static_cast<std::int64_t>(d.weights.size() + d.bias.size());
                          },
                          [](const BatchNormSpec& b) -> std::int64_t {
                              return static_cast<std::int64_t>(b.gamma.size() + b.beta.size() + b.mean.size() +
                                                               b.var.size());
                          },
                          [](const auto&) -> std::int64_t { return 0; },
                      },
                      spec);
}

std::int64_t count_params(const ModelGraph& graph) {
    std::int64_t total = 0;
    for (const auto& layer : graph.layers()) total += count_params(layer.spec);
    return total;
}

OpCounts count_layer_ops(const LayerSpec& spec, const TensorShape& in) {
    const auto out = infer_shape(spec, in);
    if (!out.ok()) throw ValidationError(out.error);
    const TensorShape& o = out.shape;
    OpCounts ops;
    std::visit(overloaded{
                   [&](const ConvSpec& c) {
                       ops.conv = 2LL * c.k * c.k * c.c_in * c.c_out * o.n * o.h * o.w;
                       if (c.fused_relu) ops.eltwise = o.elements();
                   },
                   [&](const DenseSpec& d) { ops.dense = 2LL * d.in * d.out * o.n; },
                   [&](const MaxPoolSpec& p) { ops.pool = o.elements() * p.k * p.k; },
                   [&](const GlobalAvgPoolSpec&) { ops.pool = in.elements(); },
                   [&](const auto&) { ops.eltwise = in.elements(); },
               },
               spec);
    return ops;
}

GraphOps count_ops(const ModelGraph& graph, const TensorShape& input) {
    GraphOps result;
    TensorShape cur = input;
    for (const auto& layer : graph.layers()) {
        auto ops = count_layer_ops(layer.spec, cur);
        result.total += ops;
        result.per_layer.push_back(ops);
        cur = infer_shape(layer.spec, cur).shape;
    }
    return result;
}

GraphOps count_ops(const ModelGraph& graph) { return count_ops(graph, graph.input_shape()); }

}  // namespace vdpu
