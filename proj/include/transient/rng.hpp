#pragma once

#include <cstdint>

namespace transient {

// SplitMix64 (Steele et al.). Small, fast, and seed-stable across platforms,
// which std::*_distribution is not. Used everywhere randomness is needed so
// that seeded runs are bit-reproducible.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Combines a base seed with a stream index (ray id, sweep cell, ...) into an
// independent stream seed. Counter-based so parallel evaluation order cannot
// change the draws.
inline std::uint64_t seed_stream(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 mix(seed ^ (0x9e3779b97f4a7c15ULL + stream * 0xd1342543de82ef95ULL));
    mix.next();
    return mix.next();
}

}  // namespace transient
