#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace abkd {

// Deterministic PRNG with a fixed algorithm so that identical seeds give
// identical streams on every platform and toolchain (std distributions are
// implementation-defined, which would break byte-identical reruns).
//
// Generator: splitmix64. Uniform doubles take the top 53 bits; normals use
// Box-Muller; shuffles are Fisher-Yates. All documented here because runs
// must be reproducible bit-for-bit from (algorithm, seed).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Derive an independent stream, e.g. one per sweep run or worker shard.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        mix.next_u64();
        return mix;
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (pair cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Flat Dirichlet draw: C independent Exp(1) variates, normalized.
    std::vector<double> dirichlet(std::size_t n) {
        std::vector<double> v(n);
        double sum = 0.0;
        for (auto& x : v) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            x = -std::log(u);
            sum += x;
        }
        for (auto& x : v) x /= sum;
        return v;
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace abkd
