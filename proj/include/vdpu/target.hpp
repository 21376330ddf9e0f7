#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "vdpu/graph.hpp"

namespace vdpu {

/// DPU convolution architecture; the numeral is the peak operation count per clock cycle.
enum class Arch { B512, B800, B1024, B1152, B1600, B2304, B3136, B4096 };

int peak_ops_per_cycle(Arch arch) noexcept;
const char* to_string(Arch arch) noexcept;
Arch arch_from_string(const std::string& name);

struct DeviceBudget {
    std::int64_t dsp = 1728;
    std::int64_t bram = 312;
    std::int64_t ff = 460800;
    std::int64_t lut = 230400;
};

/// Resource cost of two B4096 cores; other sizes scale linearly with peak ops.
struct DualCoreCost {
    std::int64_t dsp = 1420;
    std::int64_t bram = 210;
    std::int64_t ff = 198725;
    std::int64_t lut = 105845;
};

inline constexpr int kIsaVersion = 1;

struct TargetConfig {
    std::string name = "zcu104_dual_b4096";
    Arch arch = Arch::B4096;
    int cores = 2;
    double clock_mhz = 300.0;
    DeviceBudget device;
    DualCoreCost dual_core_cost;
    double bandwidth_mbps = 2041.91;  // shared by every core, 1 MB = 1e6 bytes
    double power_w = 60.0;
    std::set<LayerKind> supported_ops = {LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool,
                                         LayerKind::globalavgpool, LayerKind::dense};
    std::int64_t buffer_bytes = 512 * 1024;  // on-chip buffer per core
    int isa_version = kIsaVersion;

    int peak_ops() const noexcept { return peak_ops_per_cycle(arch); }
    double clock_hz() const noexcept { return clock_mhz * 1e6; }

    /// Throws ValidationError listing every out-of-range field.
    void validate() const;
};

TargetConfig default_target();

nlohmann::json target_to_json(const TargetConfig& target);
TargetConfig target_from_json(const nlohmann::json& doc);
TargetConfig load_target(const std::filesystem::path& path);
void save_target(const TargetConfig& target, const std::filesystem::path& path);

}  // namespace vdpu
