#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hjb {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent child seed for stream `index` of `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Standard normal draw addressed by a counter tuple rather than a stream
/// position, so the value depends only on (seed, a, b, c, d).
inline double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d) {
    std::uint64_t key = derive_seed(seed, a);
    key = derive_seed(key, b);
    key = derive_seed(key, c);
    key = derive_seed(key, d);
    const std::uint64_t r1 = splitmix64(key);
    const std::uint64_t r2 = splitmix64(key ^ 0xd1b54a32d192ed03ULL);
    // 53-bit uniforms; u1 in (0, 1] keeps the log finite.
    const double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace hjb
