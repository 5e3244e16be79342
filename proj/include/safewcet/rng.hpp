#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include "safewcet/time.hpp"

namespace safewcet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a cell coordinate,
/// e.g. (generation, individual, sample).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> cell) {
    std::uint64_t h = splitmix64(base);
    for (auto c : cell) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stage seed: stable hash of (global seed, stage name).
inline std::uint64_t stage_seed(std::uint64_t global, std::string_view stage) {
    return splitmix64(global ^ fnv1a(stage));
}

// Portable distributions: the results must not depend on the standard
// library's distribution implementations, since artifacts are hashed.

/// Uniform in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do { x = rng(); } while (x >= limit);
    return x % n;
}

/// Uniform time on the grid {lo, lo + step, ..., <= hi}.
inline Time uniform_time(Rng& rng, Time lo, Time hi, Time step) {
    if (hi <= lo) return lo;
    const auto n = static_cast<std::uint64_t>((hi - lo).units() / step.units()) + 1;
    return lo + step * static_cast<Time::rep>(uniform_index(rng, n));
}

}  // namespace safewcet
