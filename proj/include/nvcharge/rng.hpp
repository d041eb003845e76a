#pragma once

// Counter-based random streams.
//
// Draw k of stream (seed, stream_id) is splitmix64_mix(key + (k + 1) * golden)
// with key = splitmix64_mix(seed ^ splitmix64_mix(stream_id + golden)). Every
// value is a pure function of (seed, stream_id, k), so streams are
// reproducible across platforms and can be split per trial without sharing
// state. Floating-point draws are built from the integer stream with fixed
// recipes (53-bit uniforms, Box-Muller normals, Knuth/PTRS Poisson).

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace nvcharge::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Child seed for (master, a, b, c) index tuples, e.g. (sigma index, b index, trial).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64_mix(master + kGolden);
    s = splitmix64_mix(s ^ (a + 0x1234567ULL));
    s = splitmix64_mix(s ^ (b + 0x89ABCDEULL));
    s = splitmix64_mix(s ^ (c + 0xF0F0F0FULL));
    return s;
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + kGolden))) {}

    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() { return splitmix64_mix(key_ + (++counter_) * kGolden); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1].
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean < 10.0) return poisson_knuth(mean);
        return poisson_ptrs(mean);
    }

private:
    std::uint64_t poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform_pos();
        while (prod > limit) {
            ++k;
            prod *= uniform_pos();
        }
        return k;
    }

    // Transformed rejection with squeeze (Hormann 1993), valid for mean >= 10.
    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_pos();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            const double lhs = std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b);
            const double rhs = -mean + k * loglam - std::lgamma(k + 1.0);
            if (lhs <= rhs) return static_cast<std::uint64_t>(k);
        }
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace nvcharge::rng
