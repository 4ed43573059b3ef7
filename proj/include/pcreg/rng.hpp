#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace pcreg {

/// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/**
 * Counter-based pseudo-random generator.
 *
 * Output i is mix64(key + i*gamma), i.e. splitmix64 keyed by a hashed seed.
 * Uses only fixed-width integer arithmetic, so streams are bit-reproducible
 * across platforms and independent of any library distribution code.
 * Independent streams are derived with fork(), which rehashes the key; a
 * generator is cheap to copy and never shares state.
 */
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed)
        : key_(mix64(seed ^ 0x5851F42D4C957F2Dull)) {}

    /// Derive an independent stream from an integer label.
    CounterRng fork(std::uint64_t label) const {
        CounterRng r(0);
        r.key_ = mix64(key_ ^ mix64(label ^ 0xD1342543DE82EF95ull));
        r.counter_ = 0;
        return r;
    }

    /// Derive an independent stream from a string label.
    CounterRng fork(std::string_view label) const { return fork(fnv1a64(label)); }

    CounterRng fork(std::uint64_t a, std::uint64_t b) const { return fork(a).fork(b); }

    std::uint64_t next_u64() {
        return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection sampling over the largest multiple of n below 2^64.
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    /// Standard normal via Box-Muller; consumes two words per draw.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(index(i))]);
        }
    }

    std::vector<int> permutation(int n) {
        std::vector<int> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
        shuffle(p);
        return p;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace pcreg
