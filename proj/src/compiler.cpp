#include "vdpu/compiler.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vdpu/error.hpp"

namespace vdpu {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

TileShape chw(const TensorShape& s) { return {s.c, s.h, s.w}; }

[[noreturn]] void untileable(const std::string& id, std::int64_t need, std::int64_t buffer) {
    throw ValidationError("layer '" + id + "': smallest tile needs " + std::to_string(need) +
                          " bytes but the on-chip buffer holds " + std::to_string(buffer));
}

/// Largest v in [1, hi] with fits(v), assuming fits is monotone non-increasing; 0 if none.
template <typename F>
int largest_fitting(int hi, F&& fits) {
    int lo = 0;
    while (lo < hi) {
        const int mid = lo + (hi - lo + 1) / 2;
        if (fits(mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

class Tiler {
public:
    Tiler(const QuantizedModel& model, std::int64_t buffer) : model_(model), buffer_(buffer) {}

    TilePlan run(std::size_t count) {
        const auto& in = model_.input_shape;
        add_tensor("input", TensorRole::activation, chw(in), in.per_image());
        int prev = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const QLayer& layer = model_.layers[i];
            LayerTotals totals;
            totals.id = layer.id;
            totals.kind = layer.kind();
            totals.input_tensor = prev;
            totals.output_tensor =
                add_tensor(layer.id, TensorRole::activation, chw(layer.out_shape), layer.out_shape.per_image());
            plan_.layers.push_back(totals);
            const auto first = plan_.instructions.size();
            emit(i, layer, model_.input_shape_of(i));
            auto& t = plan_.layers.back();
            for (auto k = first; k < plan_.instructions.size(); ++k) {
                t.ops += plan_.instructions[k].ops;
                t.bytes_moved += plan_.instructions[k].bytes;
            }
            prev = t.output_tensor;
        }
        return std::move(plan_);
    }

private:
    int add_tensor(std::string name, TensorRole role, TileShape shape, std::int64_t elements) {
        const int id = static_cast<int>(plan_.tensors.size());
        const std::int64_t width = role == TensorRole::bias ? 4 : 1;
        plan_.tensors.push_back({id, std::move(name), role, shape, elements * width});
        return id;
    }

    Instruction& push(Opcode op, int layer) {
        Instruction ins;
        ins.op = op;
        ins.layer = layer;
        plan_.instructions.push_back(ins);
        return plan_.instructions.back();
    }

    void load(int layer, int tensor, TileShape view, Region r, std::int64_t width = 1) {
        auto& ins = push(Opcode::LOAD, layer);
        ins.tensor = tensor;
        ins.view = view;
        ins.region = r;
        ins.in_tile = {r.channels(), r.rows(), view.w};
        ins.bytes = static_cast<std::int64_t>(r.channels()) * r.rows() * view.w * width;
    }

    void save(int layer, int tensor, TileShape view, Region r) {
        auto& ins = push(Opcode::SAVE, layer);
        ins.tensor = tensor;
        ins.view = view;
        ins.region = r;
        ins.out_tile = {r.channels(), r.rows(), view.w};
        ins.bytes = static_cast<std::int64_t>(r.channels()) * r.rows() * view.w;
    }

    // Conv and dense (as a 1x1 conv over the flattened input) share one lowering.
    void emit_matmul(int li, const std::string& id, TileShape in, TileShape out, int k, int s, int pad, bool relu,
                     int shift, bool dense) {
        auto& totals = plan_.layers.back();
        const auto taps = static_cast<std::int64_t>(in.c) * k * k;
        totals.weight_tensor = add_tensor(id + ".weight", TensorRole::weight, {out.c, static_cast<int>(taps), 1},
                                          static_cast<std::int64_t>(out.c) * taps);
        totals.bias_tensor = add_tensor(id + ".bias", TensorRole::bias, {out.c, 1, 1}, out.c);
        const int in_tensor = totals.input_tensor;
        const int out_tensor = totals.output_tensor;
        const int w_tensor = totals.weight_tensor;
        const int b_tensor = totals.bias_tensor;

        auto rows_for = [&](int oh_t) { return std::min(in.h, (oh_t - 1) * s + k); };
        auto need = [&](int co_t, int oh_t) {
            return static_cast<std::int64_t>(in.c) * rows_for(oh_t) * in.w + co_t * taps + 4LL * co_t +
                   static_cast<std::int64_t>(co_t) * oh_t * out.w;
        };
        if (need(1, 1) > buffer_) untileable(id, need(1, 1), buffer_);
        const int co_t = largest_fitting(out.c, [&](int v) { return need(v, 1) <= buffer_; });
        const int oh_t = largest_fitting(out.h, [&](int v) { return need(co_t, v) <= buffer_; });

        for (int co0 = 0; co0 < out.c; co0 += co_t) {
            const int co1 = std::min(out.c, co0 + co_t);
            load(li, w_tensor, {out.c, static_cast<int>(taps), 1}, {co0, co1, 0, static_cast<int>(taps)});
            load(li, b_tensor, {out.c, 1, 1}, {co0, co1, 0, 1}, 4);
            for (int oh0 = 0; oh0 < out.h; oh0 += oh_t) {
                const int oh1 = std::min(out.h, oh0 + oh_t);
                const int ih0 = std::clamp(oh0 * s - pad, 0, in.h);
                const int ih1 = std::clamp((oh1 - 1) * s - pad + k, ih0, in.h);
                load(li, in_tensor, in, {0, in.c, ih0, ih1});
                auto& conv = push(Opcode::CONV, li);
                conv.tensor = out_tensor;
                conv.region = {co0, co1, oh0, oh1};
                conv.in_tile = {in.c, ih1 - ih0, in.w};
                conv.out_tile = {co1 - co0, oh1 - oh0, out.w};
                conv.fused_relu = relu;
                conv.shift = shift;
                const std::int64_t macs = taps * conv.out_tile.elements();
                (dense ? conv.ops.dense : conv.ops.conv) = 2 * macs;
                if (relu) conv.ops.eltwise = conv.out_tile.elements();
                save(li, out_tensor, out, {co0, co1, oh0, oh1});
            }
        }
    }

    // Row-banded channel-tiled lowering for maxpool and standalone relu.
    void emit_banded(int li, const std::string& id, TileShape in, TileShape out, int k, int s, Opcode op) {
        const auto& totals = plan_.layers.back();
        auto rows_for = [&](int oh_t) { return std::min(in.h, (oh_t - 1) * s + k); };
        auto need = [&](int c_t, int oh_t) {
            return static_cast<std::int64_t>(c_t) * rows_for(oh_t) * in.w + static_cast<std::int64_t>(c_t) * oh_t * out.w;
        };
        if (need(1, 1) > buffer_) untileable(id, need(1, 1), buffer_);
        const int c_t = largest_fitting(in.c, [&](int v) { return need(v, 1) <= buffer_; });
        const int oh_t = largest_fitting(out.h, [&](int v) { return need(c_t, v) <= buffer_; });
        for (int c0 = 0; c0 < in.c; c0 += c_t) {
            const int c1 = std::min(in.c, c0 + c_t);
            for (int oh0 = 0; oh0 < out.h; oh0 += oh_t) {
                const int oh1 = std::min(out.h, oh0 + oh_t);
                const int ih0 = oh0 * s;
                const int ih1 = std::min(in.h, (oh1 - 1) * s + k);
                load(li, totals.input_tensor, in, {c0, c1, ih0, ih1});
                auto& ins = push(op, li);
                ins.tensor = totals.output_tensor;
                ins.region = {c0, c1, oh0, oh1};
                ins.in_tile = {c1 - c0, ih1 - ih0, in.w};
                ins.out_tile = {c1 - c0, oh1 - oh0, out.w};
                if (op == Opcode::POOL)
                    ins.ops.pool = ins.out_tile.elements() * k * k;
                else
                    ins.ops.eltwise = ins.out_tile.elements();
                save(li, totals.output_tensor, out, {c0, c1, oh0, oh1});
            }
        }
    }

    void emit_global_pool(int li, const std::string& id, TileShape in, TileShape out) {
        const auto& totals = plan_.layers.back();
        const std::int64_t plane = static_cast<std::int64_t>(in.h) * in.w;
        if (plane + 1 > buffer_) untileable(id, plane + 1, buffer_);
        const int c_t = largest_fitting(in.c, [&](int v) { return v * (plane + 1) <= buffer_; });
        for (int c0 = 0; c0 < in.c; c0 += c_t) {
            const int c1 = std::min(in.c, c0 + c_t);
            load(li, totals.input_tensor, in, {c0, c1, 0, in.h});
            auto& ins = push(Opcode::POOL, li);
            ins.tensor = totals.output_tensor;
            ins.region = {c0, c1, 0, 1};
            ins.in_tile = {c1 - c0, in.h, in.w};
            ins.out_tile = {c1 - c0, 1, 1};
            ins.ops.pool = (c1 - c0) * plane;
            save(li, totals.output_tensor, out, {c0, c1, 0, 1});
        }
    }

    void emit(std::size_t i, const QLayer& layer, const TensorShape& in_shape) {
        const int li = static_cast<int>(i);
        const TileShape in = chw(in_shape);
        const TileShape out = chw(layer.out_shape);
        std::visit(overloaded{
                       [&](const QConv& c) {
                           emit_matmul(li, layer.id, in, out, c.k, c.s, c.pad, c.fused_relu, c.shift, false);
                       },
                       [&](const QDense& d) {
                           emit_matmul(li, layer.id, {d.in, 1, 1}, {d.out, 1, 1}, 1, 1, 0, false, d.shift, true);
                       },
                       [&](const QRelu&) { emit_banded(li, layer.id, in, out, 1, 1, Opcode::ELTWISE); },
                       [&](const QMaxPool& p) { emit_banded(li, layer.id, in, out, p.k, p.s, Opcode::POOL); },
                       [&](const QGlobalAvgPool&) { emit_global_pool(li, layer.id, in, out); },
                       [&](const QSoftmax&) {
                           throw ValidationError("layer '" + layer.id + "': softmax has no accelerator lowering");
                       },
                   },
                   layer.spec);
    }

    const QuantizedModel& model_;
    std::int64_t buffer_;
    TilePlan plan_;
};

const char* to_string(TensorRole r) {
    switch (r) {
        case TensorRole::activation: return "activation";
        case TensorRole::weight: return "weight";
        case TensorRole::bias: return "bias";
    }
    return "?";
}

TensorRole role_from_string(const std::string& s) {
    if (s == "activation") return TensorRole::activation;
    if (s == "weight") return TensorRole::weight;
    if (s == "bias") return TensorRole::bias;
    throw FormatError("unknown tensor role '" + s + "'");
}

json instruction_to_json(const Instruction& i) {
    return json::array({to_string(i.op), i.layer, i.tensor, i.region.c_begin, i.region.c_end, i.region.h_begin,
                        i.region.h_end, i.view.c, i.view.h, i.view.w, i.in_tile.c, i.in_tile.h, i.in_tile.w,
                        i.out_tile.c, i.out_tile.h, i.out_tile.w, i.fused_relu ? 1 : 0, i.shift, i.ops.conv,
                        i.ops.dense, i.ops.eltwise, i.ops.pool, i.bytes});
}

Instruction instruction_from_json(const json& a) {
    if (!a.is_array() || a.size() != 23) throw FormatError("malformed instruction record");
    Instruction i;
    i.op = opcode_from_string(a[0].get<std::string>());
    i.layer = a[1];
    i.tensor = a[2];
    i.region = {a[3], a[4], a[5], a[6]};
    i.view = {a[7], a[8], a[9]};
    i.in_tile = {a[10], a[11], a[12]};
    i.out_tile = {a[13], a[14], a[15]};
    i.fused_relu = a[16].get<int>() != 0;
    i.shift = a[17];
    i.ops = {a[18], a[19], a[20], a[21]};
    i.bytes = a[22];
    return i;
}

json ops_to_json(const OpCounts& o) {
    return {{"conv", o.conv}, {"dense", o.dense}, {"eltwise", o.eltwise}, {"pool", o.pool}};
}

OpCounts ops_from_json(const json& j) {
    return {j.at("conv").get<std::int64_t>(), j.at("dense").get<std::int64_t>(), j.at("eltwise").get<std::int64_t>(),
            j.at("pool").get<std::int64_t>()};
}

std::filesystem::path sibling(const std::filesystem::path& manifest, const std::string& suffix) {
    auto stem = manifest.filename().string();
    if (auto dot = stem.rfind(".json"); dot != std::string::npos && dot + 5 == stem.size()) stem.resize(dot);
    return manifest.parent_path() / (stem + suffix);
}

}  // namespace

std::string Fingerprint::hex() const {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

Fingerprint compute_fingerprint(const TargetConfig& target) {
    Fingerprint fp;
    fp.arch = to_string(target.arch);
    fp.cores = target.cores;
    fp.clock_mhz = target.clock_mhz;
    fp.isa_version = target.isa_version;
    char clock[64];
    std::snprintf(clock, sizeof clock, "%.6f", target.clock_mhz);
    fp.digest = fnv1a("arch=" + fp.arch + ";cores=" + std::to_string(fp.cores) + ";clock_mhz=" + clock +
                      ";isa=" + std::to_string(fp.isa_version));
    return fp;
}

nlohmann::json fingerprint_to_json(const Fingerprint& fp) {
    return {{"arch", fp.arch},
            {"cores", fp.cores},
            {"clock_mhz", fp.clock_mhz},
            {"isa_version", fp.isa_version},
            {"digest", fp.hex()}};
}

Fingerprint fingerprint_from_json(const nlohmann::json& doc) {
    Fingerprint fp;
    fp.arch = doc.at("arch").get<std::string>();
    fp.cores = doc.at("cores").get<int>();
    fp.clock_mhz = doc.at("clock_mhz").get<double>();
    fp.isa_version = doc.at("isa_version").get<int>();
    fp.digest = std::stoull(doc.at("digest").get<std::string>(), nullptr, 16);
    return fp;
}

const char* to_string(Opcode op) {
    switch (op) {
        case Opcode::LOAD: return "LOAD";
        case Opcode::CONV: return "CONV";
        case Opcode::POOL: return "POOL";
        case Opcode::ELTWISE: return "ELTWISE";
        case Opcode::SAVE: return "SAVE";
    }
    return "?";
}

Opcode opcode_from_string(const std::string& name) {
    for (auto op : {Opcode::LOAD, Opcode::CONV, Opcode::POOL, Opcode::ELTWISE, Opcode::SAVE})
        if (name == to_string(op)) return op;
    throw FormatError("unknown opcode '" + name + "'");
}

OpCounts CompiledModel::total_ops() const {
    OpCounts t;
    for (const auto& l : layers) t += l.ops;
    return t;
}

std::int64_t CompiledModel::total_bytes() const {
    std::int64_t b = 0;
    for (const auto& l : layers) b += l.bytes_moved;
    return b;
}

TilePlan tile_model(const QuantizedModel& fused, std::size_t count, std::int64_t buffer_bytes) {
    return Tiler(fused, buffer_bytes).run(count);
}

CompiledModel compile(const QuantizedModel& qmodel, const TargetConfig& target) {
    target.validate();
    for (const auto& l : qmodel.layers)
        if (l.kind() == LayerKind::batchnorm) throw ValidationError("unfolded batchnorm '" + l.id + "'");

    CompiledModel out;
    out.model = fuse_relu(qmodel);
    out.fingerprint = compute_fingerprint(target);
    out.buffer_bytes = target.buffer_bytes;

    const std::size_t tail = out.model.host_tail_begin();
    for (std::size_t i = tail; i < out.model.layers.size(); ++i) out.host_layers.push_back(out.model.layers[i].id);

    std::vector<ChainEntry> chain;
    for (std::size_t i = 0; i < tail; ++i) chain.push_back({out.model.layers[i].id, out.model.layers[i].kind()});
    auto supported = target.supported_ops;
    supported.erase(LayerKind::softmax);
    supported.erase(LayerKind::batchnorm);
    const Partition parts = partition(chain, supported);
    if (parts.accelerator_subgraphs() != 1 || !parts.offenders.empty())
        throw SubgraphGateViolation(parts.accelerator_subgraphs(), parts.offenders);

    TilePlan plan = tile_model(out.model, tail, target.buffer_bytes);
    out.tensors = std::move(plan.tensors);
    out.layers = std::move(plan.layers);
    Subgraph sg;
    for (std::size_t i = 0; i < out.layers.size(); ++i) sg.layers.push_back(i);
    sg.instructions = std::move(plan.instructions);
    out.subgraphs.push_back(std::move(sg));
    return out;
}

FingerprintCheck verify_fingerprint(const CompiledModel& compiled, const TargetConfig& target) {
    const auto expected = compute_fingerprint(target).digest;
    return {compiled.fingerprint.digest == expected, compiled.fingerprint.digest, expected};
}

std::string instruction_listing(const CompiledModel& compiled) {
    std::ostringstream os;
    os << "# fingerprint " << compiled.fingerprint.hex() << " " << compiled.fingerprint.arch << "x"
       << compiled.fingerprint.cores << " @" << compiled.fingerprint.clock_mhz << "MHz isa"
       << compiled.fingerprint.isa_version << "\n";
    for (std::size_t g = 0; g < compiled.subgraphs.size(); ++g) {
        os << "# subgraph " << g << "\n";
        for (const auto& i : compiled.subgraphs[g].instructions) {
            const auto& layer = compiled.layers.at(static_cast<std::size_t>(i.layer));
            char line[512];
            std::snprintf(line, sizeof line,
                          "%-7s layer=%s t%d[c%d:%d,h%d:%d] in=%dx%dx%d out=%dx%dx%d relu=%d shift=%d ops=%lld bytes=%lld",
                          to_string(i.op), layer.id.c_str(), i.tensor, i.region.c_begin, i.region.c_end,
                          i.region.h_begin, i.region.h_end, i.in_tile.c, i.in_tile.h, i.in_tile.w, i.out_tile.c,
                          i.out_tile.h, i.out_tile.w, i.fused_relu ? 1 : 0, i.shift,
                          static_cast<long long>(i.ops.total()), static_cast<long long>(i.bytes));
            os << line << "\n";
        }
    }
    for (const auto& h : compiled.host_layers) os << "# host " << h << "\n";
    return os.str();
}

Document serialize_compiled(const CompiledModel& c) {
    BlobWriter blob;
    json tensors = json::array();
    for (const auto& t : c.tensors)
        tensors.push_back({{"id", t.id},
                           {"name", t.name},
                           {"role", to_string(t.role)},
                           {"shape", {t.shape.c, t.shape.h, t.shape.w}},
                           {"bytes", t.bytes}});
    json layers = json::array();
    for (const auto& l : c.layers)
        layers.push_back({{"id", l.id},
                          {"kind", to_string(l.kind)},
                          {"subgraph", l.subgraph},
                          {"input_tensor", l.input_tensor},
                          {"output_tensor", l.output_tensor},
                          {"weight_tensor", l.weight_tensor},
                          {"bias_tensor", l.bias_tensor},
                          {"ops", ops_to_json(l.ops)},
                          {"bytes_moved", l.bytes_moved}});
    json subgraphs = json::array();
    for (const auto& sg : c.subgraphs) {
        json ins = json::array();
        for (const auto& i : sg.instructions) ins.push_back(instruction_to_json(i));
        subgraphs.push_back({{"layers", sg.layers}, {"instructions", std::move(ins)}});
    }
    Document doc;
    doc.manifest = {{"format", "vdpu-cmodel"},
                    {"format_version", kFormatVersion},
                    {"fingerprint", fingerprint_to_json(c.fingerprint)},
                    {"buffer_bytes", c.buffer_bytes},
                    {"model", qmodel_manifest(c.model, blob)},
                    {"tensors", std::move(tensors)},
                    {"layers", std::move(layers)},
                    {"subgraphs", std::move(subgraphs)},
                    {"host_layers", c.host_layers},
                    {"totals", {{"ops", ops_to_json(c.total_ops())}, {"bytes_moved", c.total_bytes()}}}};
    doc.blob = blob.take();
    return doc;
}

CompiledModel deserialize_compiled(const Document& doc) {
    const json& m = doc.manifest;
    check_format_version(m, "vdpu-cmodel");
    CompiledModel c;
    try {
        c.fingerprint = fingerprint_from_json(m.at("fingerprint"));
        c.buffer_bytes = m.at("buffer_bytes").get<std::int64_t>();
        c.model = qmodel_from_manifest(m.at("model"), BlobReader(doc.blob));
        for (const auto& t : m.at("tensors")) {
            const auto s = t.at("shape").get<std::vector<int>>();
            c.tensors.push_back({t.at("id").get<int>(), t.at("name").get<std::string>(),
                                 role_from_string(t.at("role").get<std::string>()), {s.at(0), s.at(1), s.at(2)},
                                 t.at("bytes").get<std::int64_t>()});
        }
        for (const auto& l : m.at("layers")) {
            c.layers.push_back({l.at("id").get<std::string>(), layer_kind_from_string(l.at("kind").get<std::string>()),
                                l.at("subgraph").get<int>(), l.at("input_tensor").get<int>(),
                                l.at("output_tensor").get<int>(), l.at("weight_tensor").get<int>(),
                                l.at("bias_tensor").get<int>(), ops_from_json(l.at("ops")),
                                l.at("bytes_moved").get<std::int64_t>()});
        }
        for (const auto& sg : m.at("subgraphs")) {
            Subgraph g;
            g.layers = sg.at("layers").get<std::vector<std::size_t>>();
            for (const auto& i : sg.at("instructions")) g.instructions.push_back(instruction_from_json(i));
            c.subgraphs.push_back(std::move(g));
        }
        c.host_layers = m.at("host_layers").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("compiled model manifest: ") + e.what());
    }
    if (c.layers.size() > c.model.layers.size())
        throw ValidationError("compiled model lists more layers than its quantized model");
    return c;
}

void save_compiled(const CompiledModel& compiled, const std::filesystem::path& manifest_path) {
    write_document(serialize_compiled(compiled), manifest_path);
    {
        std::ofstream out(sibling(manifest_path, ".instr.txt"), std::ios::trunc);
        if (!out) throw Error("cannot write instruction listing");
        out << instruction_listing(compiled);
    }
    std::ofstream fp(sibling(manifest_path, ".fingerprint.json"), std::ios::trunc);
    if (!fp) throw Error("cannot write fingerprint sidecar");
    fp << fingerprint_to_json(compiled.fingerprint).dump(2) << '\n';
}

CompiledModel load_compiled(const std::filesystem::path& manifest_path) {
    return deserialize_compiled(read_document(manifest_path));
}

}  // namespace vdpu
