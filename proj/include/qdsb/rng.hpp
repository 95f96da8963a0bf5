#pragma once

#include <cstdint>
#include <random>

namespace qdsb {

/// Mixes a base seed with a stream tag so that independent consumers
/// (anchor selection, pair sampling, evaluation rollouts, ...) derived
/// from one run seed never share an engine state. splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t counter) {
    return mix_seed(mix_seed(seed, tag), counter);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace qdsb
