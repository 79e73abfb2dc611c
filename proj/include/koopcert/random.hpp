#pragma once

#include <cstdint>
#include <random>

#include "koopcert/types.hpp"

namespace koopcert {

/// splitmix64 step; used to fan a master seed out into independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-seed for a labelled stream of a master seed, e.g. (seed, trial, control index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ (a + 1)) ^ (b + 0x5851f42d4c957f2dULL));
}

using Rng = std::mt19937_64;

/// Uniform double in [lo, hi) built from raw 53-bit draws so results do not depend
/// on the standard library's distribution implementation.
inline double uniform(Rng& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

inline Vec uniform_in(Rng& rng, const Box& box) {
    Vec x(box.dim());
    for (int i = 0; i < box.dim(); ++i) x[i] = uniform(rng, box.lower()[i], box.upper()[i]);
    return x;
}

}  // namespace koopcert
