#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdpu {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Graph or document failed validation; carries every diagnostic found.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> diagnostics);
    explicit ValidationError(const std::string& diagnostic)
        : ValidationError(std::vector<std::string>{diagnostic}) {}

    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

/// Unsupported container version or corrupted payload.
class FormatError : public Error {
public:
    using Error::Error;
};

class OverflowError : public Error {
public:
    using Error::Error;
};

class FingerprintMismatch : public Error {
public:
    FingerprintMismatch(std::uint64_t compiled, std::uint64_t target);

    std::uint64_t compiled_digest() const noexcept { return compiled_; }
    std::uint64_t target_digest() const noexcept { return target_; }

private:
    std::uint64_t compiled_;
    std::uint64_t target_;
};

class ResourceFailure : public Error {
public:
    ResourceFailure(const std::string& what, std::vector<std::string> exceeded)
        : Error(what), exceeded_(std::move(exceeded)) {}

    const std::vector<std::string>& exceeded() const noexcept { return exceeded_; }

private:
    std::vector<std::string> exceeded_;
};

class SubgraphGateViolation : public Error {
public:
    SubgraphGateViolation(std::size_t subgraph_count, std::vector<std::string> offenders);

    std::size_t subgraph_count() const noexcept { return count_; }
    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    std::size_t count_;
    std::vector<std::string> offenders_;
};

}  // namespace vdpu
