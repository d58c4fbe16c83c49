#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace mob {

// Deterministic cross-platform RNG (xoshiro256** seeded via splitmix64).
// std::mt19937 with std distributions is not bit-stable across standard
// library implementations, so all seeded paths go through this.
struct Rng {
    uint64_t s[4];

    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s) w = splitmix64(x);
    }

    // Derives an independent stream, e.g. per user or per worker.
    Rng(uint64_t seed, uint64_t stream) : Rng(seed ^ (splitmix64(stream) | 1)) {}

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t next_u64() {
        const uint64_t result = rotl(s[1] * 5, 7) * 9;
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) without modulo bias.
    uint64_t next_below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller (polar form avoided to keep draw count fixed).
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Fisher-Yates partial shuffle: after the call the first k slots hold a
    // uniform k-subset in random order.
    template <class T>
    void partial_shuffle(std::vector<T>& v, size_t k) {
        const size_t n = v.size();
        if (k > n) k = n;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(next_below(n - i));
            std::swap(v[i], v[j]);
        }
    }
};

}  // namespace mob
