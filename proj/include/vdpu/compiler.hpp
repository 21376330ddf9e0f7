#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vdpu/model_io.hpp"
#include "vdpu/passes.hpp"
#include "vdpu/quantizer.hpp"
#include "vdpu/target.hpp"

namespace vdpu {

/// Digest over (architecture, core count, clock, instruction-set version).
struct Fingerprint {
    std::string arch;
    int cores = 0;
    double clock_mhz = 0.0;
    int isa_version = 0;
    std::uint64_t digest = 0;

    std::string hex() const;
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// FNV-1a 64-bit over "arch=<name>;cores=<n>;clock_mhz=<%.6f>;isa=<v>".
Fingerprint compute_fingerprint(const TargetConfig& target);

nlohmann::json fingerprint_to_json(const Fingerprint& fp);
Fingerprint fingerprint_from_json(const nlohmann::json& doc);

enum class Opcode { LOAD, CONV, POOL, ELTWISE, SAVE };
const char* to_string(Opcode op);
Opcode opcode_from_string(const std::string& name);

/// Channel range x row range over full-width rows of a (c, h, w) view.
struct Region {
    int c_begin = 0, c_end = 0;
    int h_begin = 0, h_end = 0;

    int channels() const noexcept { return c_end - c_begin; }
    int rows() const noexcept { return h_end - h_begin; }
    friend bool operator==(const Region&, const Region&) = default;
};

struct TileShape {
    int c = 0, h = 0, w = 0;
    std::int64_t elements() const noexcept { return static_cast<std::int64_t>(c) * h * w; }
    friend bool operator==(const TileShape&, const TileShape&) = default;
};

enum class TensorRole { activation, weight, bias };

struct TensorEntry {
    int id = 0;
    std::string name;
    TensorRole role = TensorRole::activation;
    TileShape shape;        // (c, h, w) view; weights use (c_out, c_in * k * k, 1)
    std::int64_t bytes = 0;
    friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

/// One accelerator instruction. LOAD/SAVE move `region` of tensor `tensor`
/// (interpreted through `view`) between DDR and the core buffer. Compute
/// opcodes produce `region` of the layer's output from the resident tiles.
struct Instruction {
    Opcode op = Opcode::LOAD;
    int layer = 0;    // index into CompiledModel::layers
    int tensor = 0;   // operand tensor id
    Region region;
    TileShape view;   // LOAD/SAVE: tensor view; compute: unused
    TileShape in_tile;
    TileShape out_tile;
    bool fused_relu = false;
    int shift = 0;
    OpCounts ops;
    std::int64_t bytes = 0;  // bytes moved by LOAD/SAVE

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

/// Per-layer totals consumed by the roofline timing model.
struct LayerTotals {
    std::string id;
    LayerKind kind = LayerKind::conv2d;
    int subgraph = 0;
    int input_tensor = 0;
    int output_tensor = 0;
    int weight_tensor = -1;
    int bias_tensor = -1;
    OpCounts ops;
    std::int64_t bytes_moved = 0;
    friend bool operator==(const LayerTotals&, const LayerTotals&) = default;
};

struct Subgraph {
    std::vector<std::size_t> layers;  // indices into CompiledModel::layers
    std::vector<Instruction> instructions;
    friend bool operator==(const Subgraph&, const Subgraph&) = default;
};

struct CompiledModel {
    QuantizedModel model;  // relu-fused; layer i of `layers` is model.layers[i]
    Fingerprint fingerprint;
    std::int64_t buffer_bytes = 0;
    std::vector<TensorEntry> tensors;
    std::vector<LayerTotals> layers;     // accelerator-side layers in chain order
    std::vector<Subgraph> subgraphs;
    std::vector<std::string> host_layers;  // trailing layers executed on the host

    OpCounts total_ops() const;
    std::int64_t total_bytes() const;

    friend bool operator==(const CompiledModel&, const CompiledModel&) = default;
};

/// Emits LOAD/compute/SAVE tiles for layers [0, count) of a fused model.
/// Output-stationary: output channels are split only when a full-channel
/// row tile does not fit the buffer; rows are then packed as tall as possible.
struct TilePlan {
    std::vector<TensorEntry> tensors;
    std::vector<LayerTotals> layers;
    std::vector<Instruction> instructions;
};
TilePlan tile_model(const QuantizedModel& fused, std::size_t count, std::int64_t buffer_bytes);

/// Fold check, relu fusion, tiling and partitioning. Throws
/// SubgraphGateViolation when the accelerator chain is not exactly one
/// subgraph, ValidationError for unfolded batchnorm or an untileable layer.
CompiledModel compile(const QuantizedModel& qmodel, const TargetConfig& target);

struct FingerprintCheck {
    bool ok = false;
    std::uint64_t compiled = 0;
    std::uint64_t target = 0;
};
FingerprintCheck verify_fingerprint(const CompiledModel& compiled, const TargetConfig& target);

std::string instruction_listing(const CompiledModel& compiled);

Document serialize_compiled(const CompiledModel& compiled);
CompiledModel deserialize_compiled(const Document& doc);

/// Writes the manifest, its blob, `<stem>.instr.txt` and `<stem>.fingerprint.json`.
void save_compiled(const CompiledModel& compiled, const std::filesystem::path& manifest_path);
CompiledModel load_compiled(const std::filesystem::path& manifest_path);

}  // namespace vdpu
