#pragma once

#include <cstdint>

namespace cocycle {

// Deterministic, platform-independent generator (splitmix64).  Used for all
// sampling so that identical seeds give bit-identical runs on any host;
// std::mt19937 distributions are not guaranteed reproducible across
// standard-library implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

private:
    std::uint64_t state_;
};

// Stable derivation of a per-item seed from a run seed and an index, so each
// sampled point gets an independent, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    SplitMix64 mix(base ^ (0x517cc1b727220a95ull * (index + 1)));
    return mix.next_u64();
}

}  // namespace cocycle
