#ifndef LQAGG_RNG_HPP
#define LQAGG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include "lqagg/errors.hpp"

namespace lqagg {

// Deterministic seeded randomness. Everything here is fully specified by the
// C++ standard (mt19937_64) or by this file (distributions), so identical
// seeds give identical streams on every platform and compiler.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Fold a stream path (replicate index, purpose tag, ...) into a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = base;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t p : path) {
        s ^= splitmix64(s) + p;
        out = splitmix64(s);
    }
    return out;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double open01() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    // Standard normal via Box-Muller. One value per call, no cached spare,
    // so the stream position is a simple function of the call count.
    double normal() {
        double u1 = open01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Uniform integer in [lo, hi] by rejection (no modulo bias).
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        if (lo > hi) throw validation_error("uniform_int: empty range");
        std::uint64_t span = hi - lo + 1;
        if (span == 0) return engine_(); // full 64-bit range
        std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + x % span;
    }

    // +1 or -1 with equal probability.
    double rademacher() { return (engine_() & 1ULL) ? 1.0 : -1.0; }

private:
    std::mt19937_64 engine_;
};

} // namespace lqagg

#endif
