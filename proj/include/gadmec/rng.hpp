#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gadmec {

/// 64-bit FNV-1a. Used wherever a hash must be identical across platforms
/// and standard-library versions (std::hash promises neither).
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// SplitMix64 step; finalizer doubles as a seed/state mixer.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// One mixed output without mutating the caller's value.
inline std::uint64_t mix64(std::uint64_t x) {
    return splitmix64(x);
}

/// Map a u64 to [0,1). The 53-bit mantissa construction is exact and
/// identical everywhere, unlike std::uniform_real_distribution.
inline double u64_to_unit_double(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Seedable generator with platform-stable output.
///
/// std::mt19937_64 produces a fully specified sequence, but the standard
/// distributions on top of it do not; this wrapper draws doubles and bounded
/// integers with fixed arithmetic so that a (seed, purpose) pair yields the
/// same stream on every platform. Substreams are derived by hashing the
/// purpose tag into the seed, which keeps independent concerns (population
/// init, crossover, mutants, bootstrap replicates) decoupled from each other
/// and from evaluation order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t seed, std::string_view purpose) {
        return Rng(mix64(seed ^ fnv1a64(purpose)));
    }

    static Rng substream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
        return Rng(mix64(mix64(seed ^ fnv1a64(purpose)) ^ (index * 0x9e3779b97f4a7c15ull + 1)));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0,1).
    double uniform() { return u64_to_unit_double(gen_()); }

    /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % bound;
    }

    bool coin() { return (gen_() >> 63) != 0; }

  private:
    std::mt19937_64 gen_;
};

} // namespace gadmec
