#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vdpu/compiler.hpp"
#include "vdpu/target.hpp"
#include "vdpu/tensor.hpp"

namespace vdpu {

struct ResourceUsage {
    std::string name;
    std::int64_t used = 0;
    std::int64_t total = 0;
    double percent = 0.0;
    bool ok = true;
};

struct ResourceReport {
    std::vector<ResourceUsage> rows;  // DSP, BRAM, FF, LUT
    bool pass = true;
    std::vector<std::string> exceeded;

    const ResourceUsage& row(const std::string& name) const;
    /// "DSP 1420 (82.18%)" style lines plus a verdict.
    std::string to_text() const;
};

/// used = ceil(cores * dual_core_cost * peak_ops / (2 * 4096)) per resource.
ResourceReport estimate_resources(const TargetConfig& target);

enum class Bound { compute, memory };
const char* to_string(Bound b);

struct LayerCycles {
    std::int64_t compute = 0;
    std::int64_t memory = 0;
    Bound bound = Bound::compute;

    std::int64_t cycles() const noexcept { return compute >= memory ? compute : memory; }
};

/// compute = ceil(ops / peak), memory = ceil(bytes / (allocated bandwidth / clock)).
LayerCycles layer_cycles(std::int64_t ops, std::int64_t bytes, const TargetConfig& target, double allocated_mbps);
LayerCycles layer_cycles(const LayerTotals& totals, const TargetConfig& target, double allocated_mbps);

/// Per-stream bandwidth: bandwidth / streams, degraded by
/// 1 / (1 + kappa * max(0, streams - cores)).
double arbitrate_bandwidth(int active_streams, const TargetConfig& target, double kappa = 0.0);

/// Scenario knobs for multi-stream timing.
struct StreamModel {
    double kappa = 0.0;
    /// When set, replaces the frame's compute time; spread over layers in proportion to their ops.
    std::optional<double> core_time_s;
};

struct LayerTrace {
    std::string layer;
    LayerCycles cycles;
};

struct CycleTrace {
    std::vector<LayerTrace> layers;
    std::int64_t total_cycles = 0;
    int core = 0;
    int active_streams = 1;

    /// layer,compute_cycles,memory_cycles,bound
    std::string to_csv() const;
};

/// Chain-model frame timing with `active_streams` streams sharing the cores
/// and the memory port. With more streams than cores each stream gets
/// cores/streams of a core, stretching compute cycles by that factor.
CycleTrace frame_trace(const std::vector<LayerTotals>& layers, const TargetConfig& target, int active_streams,
                       const StreamModel& model = {});
CycleTrace frame_trace(const CompiledModel& compiled, const TargetConfig& target, int active_streams,
                       const StreamModel& model = {});

/// A compiled model accepted by a target: fingerprint matches and resources fit.
class LoadedModel {
public:
    const CompiledModel& compiled() const noexcept { return *compiled_; }
    const TargetConfig& target() const noexcept { return target_; }
    const ResourceReport& resources() const noexcept { return resources_; }

private:
    friend LoadedModel load_model(CompiledModel compiled, const TargetConfig& target);
    std::shared_ptr<const CompiledModel> compiled_;
    TargetConfig target_;
    ResourceReport resources_;
};

/// Throws FingerprintMismatch or ResourceFailure.
LoadedModel load_model(CompiledModel compiled, const TargetConfig& target);

struct FrameResult {
    TensorI8 output;
    int class_index = 0;
    CycleTrace trace;
};

/// Executes the instruction stream tile by tile on one core.
FrameResult simulate_frame(const LoadedModel& handle, const TensorF32& image, int core = 0);

}  // namespace vdpu
