#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "vdpu/error.hpp"

namespace vdpu::fixed {

inline constexpr std::int64_t kInt32Min = std::numeric_limits<std::int32_t>::min();
inline constexpr std::int64_t kInt32Max = std::numeric_limits<std::int32_t>::max();

/// Round half to even under the default floating-point environment.
inline double round_half_even(double x) { return std::nearbyint(x); }

/// round_half_even(num / den) for den > 0, exact in integers.
inline std::int64_t round_div(std::int64_t num, std::int64_t den) {
    std::int64_t q = num / den;
    std::int64_t rem = num % den;
    if (rem < 0) {  // floor division
        rem += den;
        --q;
    }
    const std::int64_t twice = 2 * rem;
    if (twice > den || (twice == den && (q & 1) != 0)) ++q;
    return q;
}

/// round_half_even(acc * 2^-shift). Negative shifts scale up; results past
/// int32 range saturate at the int32 bounds (the caller clamps to int8 anyway).
inline std::int64_t shift_round(std::int64_t acc, int shift) {
    if (shift <= 0) {
        if (acc == 0) return 0;
        if (-shift > 31) return acc > 0 ? kInt32Max : kInt32Min;
        return acc * (std::int64_t{1} << -shift);
    }
    if (shift > 40) return 0;  // |acc| < 2^32, so the quotient rounds to zero
    std::int64_t q = acc >> shift;  // arithmetic shift: floor
    const std::int64_t rem = acc - q * (std::int64_t{1} << shift);
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1) != 0)) ++q;
    return q;
}

/// Clamp to [-128, 127]; reports whether the value saturated.
inline std::int8_t saturate_int8(std::int64_t v, bool& clipped) {
    clipped = v < -128 || v > 127;
    if (v < -128) return -128;
    if (v > 127) return 127;
    return static_cast<std::int8_t>(v);
}

/// Accumulator add that enforces the INT32 register width.
inline std::int64_t accumulate(std::int64_t acc, std::int64_t term) {
    acc += term;
    if (acc < kInt32Min || acc > kInt32Max)
        throw OverflowError("INT32 accumulator overflow (partial sum " + std::to_string(acc) + ")");
    return acc;
}

}  // namespace vdpu::fixed
