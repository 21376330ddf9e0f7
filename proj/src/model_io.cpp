#include "vdpu/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "vdpu/error.hpp"
#include "vdpu/random.hpp"

namespace vdpu {

static_assert(std::endian::native == std::endian::little, "blob encoding assumes a little-endian host");

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> he_uniform(Rng& rng, std::size_t count, std::int64_t fan_in) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::vector<float> v(count);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

std::vector<float> uniform_vec(Rng& rng, std::size_t count, float lo, float hi) {
    std::vector<float> v(count);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

template <typename T>
json BlobWriter::add(std::span<const T> values, std::vector<std::int64_t> shape) {
    const std::size_t offset = blob_.size();
    const std::size_t length = values.size_bytes();
    blob_.resize(offset + length);
    if (length > 0) std::memcpy(blob_.data() + offset, values.data(), length);
    return json{{"dtype", to_string(DTypeOf<T>::value)},
                {"shape", shape},
                {"offset", offset},
                {"length", length},
                {"crc32", crc32(std::span<const std::uint8_t>(blob_.data() + offset, length))}};
}

template <typename T>
std::vector<T> BlobReader::read(const json& record) const {
    const auto dtype = dtype_from_string(record.at("dtype").get<std::string>());
    if (dtype != DTypeOf<T>::value)
        throw FormatError(std::string("tensor record has dtype ") + to_string(dtype) + ", expected " +
                          to_string(DTypeOf<T>::value));
    const auto offset = record.at("offset").get<std::uint64_t>();
    const auto length = record.at("length").get<std::uint64_t>();
    if (offset > blob_.size() || length > blob_.size() - offset)
        throw FormatError("tensor payload [" + std::to_string(offset) + ", +" + std::to_string(length) +
                          ") lies outside the " + std::to_string(blob_.size()) + "-byte blob (checksum)");
    const auto bytes = blob_.subspan(offset, length);
    if (crc32(bytes) != record.at("crc32").get<std::uint32_t>())
        throw FormatError("tensor payload checksum mismatch at offset " + std::to_string(offset));
    if (length % sizeof(T) != 0) throw FormatError("tensor payload length is not a multiple of the element size");
    std::vector<T> out(length / sizeof(T));
    if (length > 0) std::memcpy(out.data(), bytes.data(), length);
    return out;
}

template <typename T>
Tensor<T> BlobReader::read_tensor(const json& record) const {
    const auto dims = record.at("shape").get<std::vector<int>>();
    if (dims.size() != 4) throw FormatError("tensor record shape must have 4 dimensions");
    return Tensor<T>({dims[0], dims[1], dims[2], dims[3]}, read<T>(record));
}

template json BlobWriter::add<float>(std::span<const float>, std::vector<std::int64_t>);
template json BlobWriter::add<std::int8_t>(std::span<const std::int8_t>, std::vector<std::int64_t>);
template json BlobWriter::add<std::int32_t>(std::span<const std::int32_t>, std::vector<std::int64_t>);
template std::vector<float> BlobReader::read<float>(const json&) const;
template std::vector<std::int8_t> BlobReader::read<std::int8_t>(const json&) const;
template std::vector<std::int32_t> BlobReader::read<std::int32_t>(const json&) const;
template Tensor<float> BlobReader::read_tensor<float>(const json&) const;
template Tensor<std::int8_t> BlobReader::read_tensor<std::int8_t>(const json&) const;
template Tensor<std::int32_t> BlobReader::read_tensor<std::int32_t>(const json&) const;

Document read_document(const std::filesystem::path& manifest_path) {
    Document doc;
    const auto text = read_file(manifest_path);
    try {
        doc.manifest = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(manifest_path.string() + ": " + e.what());
    }
    if (doc.manifest.contains("blob")) {
        const auto blob_path = manifest_path.parent_path() / doc.manifest["blob"].get<std::string>();
        doc.blob = read_file(blob_path);
    }
    return doc;
}

void write_document(Document doc, const std::filesystem::path& manifest_path) {
    auto stem = manifest_path.filename().string();
    if (auto dot = stem.rfind(".json"); dot != std::string::npos && dot + 5 == stem.size()) stem.resize(dot);
    const std::string blob_name = stem + ".bin";
    doc.manifest["blob"] = blob_name;
    write_file(manifest_path.parent_path() / blob_name, doc.blob);
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + manifest_path.string());
    out << doc.manifest.dump(2) << '\n';
}

void check_format_version(const json& manifest, const std::string& expected_format) {
    const auto format = manifest.value("format", std::string{});
    if (format != expected_format)
        throw FormatError("document format is '" + format + "', expected '" + expected_format + "'");
    const int version = manifest.value("format_version", -1);
    if (version != kFormatVersion)
        throw FormatError("unsupported format version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kFormatVersion) + ")");
}

ModelGraph build_graph(const Document& doc) {
    const json& m = doc.manifest;
    std::vector<std::string> diags;
    TensorShape input{};
    try {
        const auto dims = m.at("input_shape").get<std::vector<int>>();
        if (dims.size() != 4)
            diags.push_back("input_shape must have 4 dimensions");
        else
            input = {dims[0], dims[1], dims[2], dims[3]};
    } catch (const json::exception& e) {
        diags.push_back(std::string("input_shape: ") + e.what());
    }

    const bool seeded = m.contains("init");
    Rng rng(seeded ? m["init"].value("seed", 0ULL) : 0ULL);
    const BlobReader blob(doc.blob);

    std::vector<Layer> layers;
    const json layer_docs = m.value("layers", json::array());
    for (std::size_t i = 0; i < layer_docs.size(); ++i) {
        const json& l = layer_docs[i];
        const std::string id = l.value("id", std::string{});
        const std::string where = "layer '" + id + "': ";
        try {
            const auto kind = layer_kind_from_string(l.at("kind").get<std::string>());
            const json params = l.value("params", json::object());
            auto load = [&](const char* name, std::size_t count, auto&& generate) -> std::vector<float> {
                if (params.contains(name)) return blob.read<float>(params[name]);
                if (!seeded) throw ValidationError(where + "missing parameter '" + name + "' and no seeded init");
                return generate(count);
            };
            Layer layer{id, ReluSpec{}};
            switch (kind) {
                case LayerKind::conv2d: {
                    ConvSpec c;
                    c.k = l.at("k").get<int>();
                    c.s = l.value("s", 1);
                    c.pad = l.value("pad", 0);
                    c.c_in = l.at("c_in").get<int>();
                    c.c_out = l.at("c_out").get<int>();
                    c.fused_relu = l.value("fused_relu", false);
                    const auto count = static_cast<std::size_t>(std::max<std::int64_t>(c.weight_count(), 0));
                    c.weights = load("weight", count, [&](std::size_t n) {
                        return he_uniform(rng, n, std::max<std::int64_t>(1, c.c_in * c.k * c.k));
                    });
                    if (l.value("bias", true))
                        c.bias = load("bias", static_cast<std::size_t>(c.c_out),
                                      [&](std::size_t n) { return uniform_vec(rng, n, -0.05f, 0.05f); });
                    layer.spec = std::move(c);
                    break;
                }
                case LayerKind::batchnorm: {
                    BatchNormSpec b;
                    const auto c = static_cast<std::size_t>(l.value("channels", 0));
                    b.gamma = load("gamma", c, [&](std::size_t n) { return uniform_vec(rng, n, 0.5f, 1.5f); });
                    b.beta = load("beta", c, [&](std::size_t n) { return uniform_vec(rng, n, -0.1f, 0.1f); });
                    b.mean = load("mean", c, [&](std::size_t n) { return uniform_vec(rng, n, -0.1f, 0.1f); });
                    b.var = load("var", c, [&](std::size_t n) { return uniform_vec(rng, n, 0.5f, 1.5f); });
                    b.eps = l.value("eps", 1e-5f);
                    layer.spec = std::move(b);
                    break;
                }
                case LayerKind::relu: layer.spec = ReluSpec{}; break;
                case LayerKind::maxpool: layer.spec = MaxPoolSpec{l.at("k").get<int>(), l.value("s", l.at("k").get<int>())}; break;
                case LayerKind::globalavgpool: layer.spec = GlobalAvgPoolSpec{}; break;
                case LayerKind::softmax: layer.spec = SoftmaxSpec{}; break;
                case LayerKind::dense: {
                    DenseSpec d;
                    d.in = l.at("in").get<int>();
                    d.out = l.at("out").get<int>();
                    const auto count = static_cast<std::size_t>(std::max(0, d.in)) * static_cast<std::size_t>(std::max(0, d.out));
                    d.weights = load("weight", count, [&](std::size_t n) { return he_uniform(rng, n, std::max(1, d.in)); });
                    if (l.value("bias", true))
                        d.bias = load("bias", static_cast<std::size_t>(d.out),
                                      [&](std::size_t n) { return uniform_vec(rng, n, -0.05f, 0.05f); });
                    layer.spec = std::move(d);
                    break;
                }
            }
            layers.push_back(std::move(layer));
        } catch (const ValidationError& e) {
            for (const auto& d : e.diagnostics()) diags.push_back(d.rfind("layer '", 0) == 0 ? d : where + d);
        } catch (const json::exception& e) {
            diags.push_back(where + e.what());
        }
    }

    std::vector<Edge> edges;
    if (m.contains("edges")) {
        for (const auto& e : m["edges"]) edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return ModelGraph::create(m.value("name", std::string{"model"}), input, std::move(layers), std::move(edges));
}

Document serialize_graph(const ModelGraph& graph) {
    BlobWriter blob;
    json layers = json::array();
    auto vec = [&](const std::vector<float>& v) {
        return blob.add<float>(v, {static_cast<std::int64_t>(v.size())});
    };
    for (const auto& layer : graph.layers()) {
        json l{{"id", layer.id}, {"kind", to_string(layer.kind())}};
        std::visit(overloaded{
                       [&](const ConvSpec& c) {
                           l["k"] = c.k;
                           l["s"] = c.s;
                           l["pad"] = c.pad;
                           l["c_in"] = c.c_in;
                           l["c_out"] = c.c_out;
                           l["bias"] = !c.bias.empty();
                           if (c.fused_relu) l["fused_relu"] = true;
                           l["params"]["weight"] = blob.add<float>(c.weights, {c.c_out, c.c_in, c.k, c.k});
                           if (!c.bias.empty()) l["params"]["bias"] = vec(c.bias);
                       },
                       [&](const BatchNormSpec& b) {
                           l["channels"] = b.gamma.size();
                           l["eps"] = b.eps;
                           l["params"] = {{"gamma", vec(b.gamma)}, {"beta", vec(b.beta)},
                                          {"mean", vec(b.mean)},   {"var", vec(b.var)}};
                       },
                       [&](const MaxPoolSpec& p) {
                           l["k"] = p.k;
                           l["s"] = p.s;
                       },
                       [&](const DenseSpec& d) {
                           l["in"] = d.in;
                           l["out"] = d.out;
                           l["bias"] = !d.bias.empty();
                           l["params"]["weight"] = blob.add<float>(d.weights, {d.out, d.in});
                           if (!d.bias.empty()) l["params"]["bias"] = vec(d.bias);
                       },
                       [](const auto&) {},
                   },
                   layer.spec);
        layers.push_back(std::move(l));
    }
    const auto& s = graph.input_shape();
    Document doc;
    doc.manifest = {{"format", "vdpu-model"},
                    {"format_version", kFormatVersion},
                    {"name", graph.name()},
                    {"input_shape", {s.n, s.c, s.h, s.w}},
                    {"layers", std::move(layers)},
                    {"edges", graph.edges()},
                    {"param_count", count_params(graph)}};
    doc.blob = blob.take();
    return doc;
}

ModelGraph deserialize_graph(const Document& doc) {
    check_format_version(doc.manifest, "vdpu-model");
    return build_graph(doc);
}

ModelGraph load_graph(const std::filesystem::path& manifest_path) {
    return deserialize_graph(read_document(manifest_path));
}

void save_graph(const ModelGraph& graph, const std::filesystem::path& manifest_path) {
    write_document(serialize_graph(graph), manifest_path);
}

template <typename T>
void TensorBundle::put(const std::string& name, const Tensor<T>& t) {
    records_[name] = writer_.add(t);
}

template <typename T>
Tensor<T> TensorBundle::get(const std::string& name) const {
    if (!records_.contains(name)) throw FormatError("tensor bundle has no entry '" + name + "'");
    return BlobReader(writer_.bytes()).read_tensor<T>(records_[name]);
}

bool TensorBundle::contains(const std::string& name) const { return records_.contains(name); }

void TensorBundle::save(const std::filesystem::path& manifest_path) const {
    Document doc;
    doc.manifest = {{"format", "vdpu-tensors"}, {"format_version", kFormatVersion}, {"tensors", records_},
                    {"meta", meta_}};
    doc.blob = writer_.bytes();
    write_document(std::move(doc), manifest_path);
}

TensorBundle TensorBundle::load(const std::filesystem::path& manifest_path) {
    auto doc = read_document(manifest_path);
    check_format_version(doc.manifest, "vdpu-tensors");
    TensorBundle b;
    b.records_ = doc.manifest.value("tensors", json::object());
    b.meta_ = doc.manifest.value("meta", json::object());
    b.writer_ = BlobWriter(std::move(doc.blob));
    return b;
}

template void TensorBundle::put<float>(const std::string&, const Tensor<float>&);
template void TensorBundle::put<std::int8_t>(const std::string&, const Tensor<std::int8_t>&);
template void TensorBundle::put<std::int32_t>(const std::string&, const Tensor<std::int32_t>&);
template Tensor<float> TensorBundle::get<float>(const std::string&) const;
template Tensor<std::int8_t> TensorBundle::get<std::int8_t>(const std::string&) const;
template Tensor<std::int32_t> TensorBundle::get<std::int32_t>(const std::string&) const;

}  // namespace vdpu
