// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace vidbossa {

/// Deterministic 64-bit PRNG used everywhere randomness is needed.
///
/// Algorithm: Marsaglia's xorshift64* — the state is advanced with the
/// shift triple (12, 25, 27) and the output is the state scrambled by the
/// multiplier 0x2545F4914F6CDD1D. The raw seed is first mixed through one
/// round of splitmix64 so that small consecutive seeds produce unrelated
/// streams and the all-zero state (illegal for xorshift) cannot occur.
///
/// The same byte-for-byte sequence is produced on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    }

    uint64_t next() {
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform integer in [0, n). Unbiased via rejection of the short
    /// final stripe of the 64-bit range. n must be > 0.
    uint64_t next_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Standard normal pair via the polar Box-Muller transform (no
    /// trigonometry; only sqrt and log).
    void next_gaussian_pair(double& z0, double& z1) {
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double mult = std::sqrt(-2.0 * std::log(s) / s);
        z0 = u * mult;
        z1 = v * mult;
    }

    static uint64_t splitmix64(uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    uint64_t state_;
};

/// Derives a per-stage seed from the single root seed so that one knob
/// reproduces a whole run while stages stay decorrelated.
uint64_t derive_seed(uint64_t root_seed, std::string_view stage_name);

} // namespace vidbossa
