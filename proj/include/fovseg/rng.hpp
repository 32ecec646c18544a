// SPDX-License-Identifier: Apache-2.0
//
// Self-contained deterministic RNG (xoshiro256** seeded via splitmix64).
// All stochastic operations take an explicit stream so results do not depend
// on library implementations or global state. Substreams are derived by
// hashing a tag into the parent seed, which keeps independent concerns
// (data order, parameter init, sampling) on independent streams.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace fovseg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Independent stream derived from this seed and a tag.
    static RngStream derive(std::uint64_t seed, std::string_view tag) {
        return RngStream(seed ^ fnv1a64(tag));
    }
    static RngStream derive(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
        std::uint64_t mix = seed ^ fnv1a64(tag);
        mix += 0x9e3779b97f4a7c15ULL * (index + 1);
        return RngStream(mix);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = n * ((~0ULL) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (one value per call, no caching, so the
    // draw count stays predictable).
    double gaussian() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Standard Gumbel(0, 1): -log(-log(U)).
    double gumbel() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -std::log(-std::log(u));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace fovseg
