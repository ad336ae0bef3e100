#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mcnn {

/// Deterministic splitmix64 stream. Used instead of <random> engines so that
/// draws are bitwise-stable across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

// Derives an independent stream from a base seed and a component label
// (FNV-1a over the label, mixed with the base).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h ^ (base * 0x9e3779b97f4a7c15ULL);
}

}  // namespace mcnn
