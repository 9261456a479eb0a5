#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dtwin {

using Rng = std::mt19937_64;

/// Engine seeded from a base seed and a stream id (tree index, object index, ...).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

/// Uniform double in [0, 1). Bit-exact across standard libraries, unlike
/// std::uniform_real_distribution.
inline double unit_double(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection; portable across standard libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Standard normal via Box-Muller on unit_double.
inline double standard_normal(Rng& rng) {
    double u1 = unit_double(rng);
    while (u1 <= 0.0) u1 = unit_double(rng);
    const double u2 = unit_double(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
}

}  // namespace dtwin
