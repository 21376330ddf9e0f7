#include "vdpu/target.hpp"

#include <fstream>

#include "vdpu/error.hpp"

namespace vdpu {

namespace {

constexpr struct {
    Arch arch;
    const char* name;
    int peak;
} kArchs[] = {
    {Arch::B512, "B512", 512},     {Arch::B800, "B800", 800},     {Arch::B1024, "B1024", 1024},
    {Arch::B1152, "B1152", 1152}, {Arch::B1600, "B1600", 1600}, {Arch::B2304, "B2304", 2304},
    {Arch::B3136, "B3136", 3136}, {Arch::B4096, "B4096", 4096},
};

}  // namespace

int peak_ops_per_cycle(Arch arch) noexcept {
    for (const auto& a : kArchs)
        if (a.arch == arch) return a.peak;
    return 0;
}

const char* to_string(Arch arch) noexcept {
    for (const auto& a : kArchs)
        if (a.arch == arch) return a.name;
    return "?";
}

Arch arch_from_string(const std::string& name) {
    for (const auto& a : kArchs)
        if (name == a.name) return a.arch;
    throw ValidationError("unknown DPU architecture '" + name + "' (expected B512 ... B4096)");
}

void TargetConfig::validate() const {
    std::vector<std::string> diags;
    if (cores < 1 || cores > 4) diags.push_back("cores must be in [1, 4], got " + std::to_string(cores));
    if (!(clock_mhz > 0)) diags.push_back("clock_mhz must be positive");
    if (!(bandwidth_mbps > 0)) diags.push_back("bandwidth_mbps must be positive");
    if (!(power_w > 0)) diags.push_back("power_w must be positive");
    if (buffer_bytes < 1) diags.push_back("buffer_bytes must be positive");
    if (device.dsp < 1 || device.bram < 1 || device.ff < 1 || device.lut < 1)
        diags.push_back("device budget entries must be positive");
    if (!diags.empty()) throw ValidationError(std::move(diags));
}

TargetConfig default_target() { return TargetConfig{}; }

nlohmann::json target_to_json(const TargetConfig& t) {
    nlohmann::json ops = nlohmann::json::array();
    for (auto k : t.supported_ops) ops.push_back(to_string(k));
    return {{"name", t.name},
            {"arch", to_string(t.arch)},
            {"cores", t.cores},
            {"clock_mhz", t.clock_mhz},
            {"device", {{"dsp", t.device.dsp}, {"bram", t.device.bram}, {"ff", t.device.ff}, {"lut", t.device.lut}}},
            {"dual_core_cost",
             {{"dsp", t.dual_core_cost.dsp},
              {"bram", t.dual_core_cost.bram},
              {"ff", t.dual_core_cost.ff},
              {"lut", t.dual_core_cost.lut}}},
            {"bandwidth_mbps", t.bandwidth_mbps},
            {"power_w", t.power_w},
            {"supported_ops", ops},
            {"buffer_bytes", t.buffer_bytes},
            {"isa_version", t.isa_version}};
}

TargetConfig target_from_json(const nlohmann::json& doc) {
    TargetConfig t;
    try {
        t.name = doc.value("name", t.name);
        t.arch = arch_from_string(doc.value("arch", std::string(to_string(t.arch))));
        t.cores = doc.value("cores", t.cores);
        t.clock_mhz = doc.value("clock_mhz", t.clock_mhz);
        if (doc.contains("device")) {
            const auto& d = doc["device"];
            t.device = {d.value("dsp", t.device.dsp), d.value("bram", t.device.bram), d.value("ff", t.device.ff),
                        d.value("lut", t.device.lut)};
        }
        if (doc.contains("dual_core_cost")) {
            const auto& d = doc["dual_core_cost"];
            t.dual_core_cost = {d.value("dsp", t.dual_core_cost.dsp), d.value("bram", t.dual_core_cost.bram),
                                d.value("ff", t.dual_core_cost.ff), d.value("lut", t.dual_core_cost.lut)};
        }
        t.bandwidth_mbps = doc.value("bandwidth_mbps", t.bandwidth_mbps);
        t.power_w = doc.value("power_w", t.power_w);
        if (doc.contains("supported_ops")) {
            t.supported_ops.clear();
            for (const auto& k : doc["supported_ops"]) t.supported_ops.insert(layer_kind_from_string(k.get<std::string>()));
        }
        t.buffer_bytes = doc.value("buffer_bytes", t.buffer_bytes);
        t.isa_version = doc.value("isa_version", t.isa_version);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("target: ") + e.what());
    }
    t.validate();
    return t;
}

TargetConfig load_target(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return target_from_json(doc);
}

void save_target(const TargetConfig& target, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << target_to_json(target).dump(2) << '\n';
}

}  // namespace vdpu
