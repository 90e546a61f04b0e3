#pragma once

#include <cmath>
#include <cstdint>

#include "rgan/common.hpp"

namespace rgan {

// Deterministic splitmix64 stream. All randomness in the project flows through
// this type so that a run is a pure function of its seed; std::<random>
// distributions are implementation-defined and are deliberately not used.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

    uint64_t seed() const { return seed_; }

    // splitmix64 (Steele, Lea, Flood 2014)
    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent substream addressed by index; stable across calls.
    Rng split(uint64_t index) const { return Rng(mix(seed_, index)); }

    // Sequentially numbered substream (advances the split counter).
    Rng split() { return split(0x5851F42D4C957F2DULL + split_count_++); }

    uint64_t split_count() const { return split_count_; }

    // Uniform in [0, n). Fixed-point multiply keeps the draw deterministic.
    uint64_t uniform_index(uint64_t n) {
        RGAN_REQUIRE(n > 0, "uniform_index: n must be positive");
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        RGAN_REQUIRE(lo <= hi, "uniform_int: empty range");
        return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo) + 1));
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform_double() < p; }

    // Box-Muller, non-caching variant: two uniforms per draw.
    double gaussian(double mean, double sd) {
        double u1 = uniform_double();
        double u2 = uniform_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    float uniform_float(float lo, float hi) {
        return lo + static_cast<float>(uniform_double()) * (hi - lo);
    }

private:
    static uint64_t mix(uint64_t seed, uint64_t index) {
        // One splitmix64 step over the index, xored into the seed, then one more
        // step so nearby (seed, index) pairs land far apart.
        uint64_t z = index + 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= (z >> 31);
        uint64_t s = seed ^ z;
        s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ULL;
        s = (s ^ (s >> 27)) * 0x94D049BB133111EBULL;
        return s ^ (s >> 31);
    }

    uint64_t seed_;
    uint64_t state_;
    uint64_t split_count_ = 0;
};

}  // namespace rgan
