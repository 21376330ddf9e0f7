#include "vdpu/error.hpp"

#include <cstdio>

namespace vdpu {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += "; ";
        out += item;
    }
    return out;
}

std::string hex(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> diagnostics)
    : Error("validation failed: " + join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

FingerprintMismatch::FingerprintMismatch(std::uint64_t compiled, std::uint64_t target)
    : Error("fingerprint mismatch: compiled model " + hex(compiled) + ", target " + hex(target)),
      compiled_(compiled),
      target_(target) {}

SubgraphGateViolation::SubgraphGateViolation(std::size_t subgraph_count, std::vector<std::string> offenders)
    : Error("accelerator subgraph count is " + std::to_string(subgraph_count) +
            ", expected 1; unsupported layers: " + join(offenders)),
      count_(subgraph_count),
      offenders_(std::move(offenders)) {}

}  // namespace vdpu
