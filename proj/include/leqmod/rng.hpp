#pragma once

#include <cstdint>
#include <random>

namespace leqmod {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and a key path, e.g.
/// (seed, subject index, count level). The same key always gives the same
/// stream regardless of the order in which streams are created.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) noexcept
{
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
{
    return Rng(stream_seed(seed, a, b, c));
}

/// Uniform double in [0, 1) from the top 53 bits; portable across standard
/// library implementations.
inline double uniform01(Rng& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [lo, hi].
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t lo, std::uint64_t hi) noexcept
{
    return lo + static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

} // namespace leqmod
