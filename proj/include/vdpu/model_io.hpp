#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdpu/graph.hpp"
#include "vdpu/tensor.hpp"

namespace vdpu {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// A JSON manifest plus the little-endian binary blob its tensor records point into.
/// Each record is {"dtype", "shape", "offset", "length", "crc32"}.
struct Document {
    json manifest;
    std::vector<std::uint8_t> blob;
};

class BlobWriter {
public:
    BlobWriter() = default;
    explicit BlobWriter(std::vector<std::uint8_t> existing) : blob_(std::move(existing)) {}

    template <typename T>
    json add(std::span<const T> values, std::vector<std::int64_t> shape);

    template <typename T>
    json add(const Tensor<T>& t) {
        const auto& s = t.shape();
        return add<T>(t.data(), {s.n, s.c, s.h, s.w});
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return blob_; }
    std::vector<std::uint8_t> take() { return std::move(blob_); }

private:
    std::vector<std::uint8_t> blob_;
};

class BlobReader {
public:
    explicit BlobReader(std::span<const std::uint8_t> blob) : blob_(blob) {}

    /// Throws FormatError on dtype mismatch, out-of-range extent, or CRC mismatch.
    template <typename T>
    std::vector<T> read(const json& record) const;

    template <typename T>
    Tensor<T> read_tensor(const json& record) const;

private:
    std::span<const std::uint8_t> blob_;
};

/// Blob file lives next to the manifest under the name in manifest["blob"].
Document read_document(const std::filesystem::path& manifest_path);
void write_document(Document doc, const std::filesystem::path& manifest_path);

/// Throws FormatError unless manifest["format_version"] equals kFormatVersion.
void check_format_version(const json& manifest, const std::string& expected_format);

/// Builds a graph from a model description. Layer parameters come from blob
/// records when present; otherwise from manifest["init"]["seed"] seeded
/// initialization. Throws ValidationError with every diagnostic found.
ModelGraph build_graph(const Document& doc);

Document serialize_graph(const ModelGraph& graph);
/// Version and checksum validation followed by build_graph.
ModelGraph deserialize_graph(const Document& doc);

ModelGraph load_graph(const std::filesystem::path& manifest_path);
void save_graph(const ModelGraph& graph, const std::filesystem::path& manifest_path);

/// Named tensors in the same container format (used for golden outputs).
class TensorBundle {
public:
    template <typename T>
    void put(const std::string& name, const Tensor<T>& t);
    template <typename T>
    Tensor<T> get(const std::string& name) const;
    bool contains(const std::string& name) const;

    json& meta() { return meta_; }
    const json& meta() const { return meta_; }

    void save(const std::filesystem::path& manifest_path) const;
    static TensorBundle load(const std::filesystem::path& manifest_path);

private:
    json records_ = json::object();
    json meta_ = json::object();
    BlobWriter writer_;
};

}  // namespace vdpu
