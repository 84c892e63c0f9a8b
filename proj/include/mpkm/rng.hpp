#pragma once
// Seeded random streams.
//
// All randomness comes from std::mt19937_64. A (seed, stream) pair is mapped
// to an engine seed by two rounds of the SplitMix64 finalizer, so the same
// user seed drives independent streams for seeding, blob centers and blob
// noise. Uniform and normal variates are derived here rather than through
// <random> distributions, whose algorithms differ between standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mpkm {

enum class RngStream : std::uint64_t {
    seeding = 0,
    blob_centers = 1,
    blob_noise = 2,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    Rng(std::uint64_t seed, RngStream stream)
        : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), n > 0, without modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

    /// Standard normal via Box-Muller (one variate per call).
    double normal() {
        double u1 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mpkm
