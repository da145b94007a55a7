#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace curbsight {

/// Deterministic 64-bit generator (splitmix64). Distribution helpers are
/// hand-rolled so streams are stable across standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (one value per call, no caching so the
    /// stream position is easy to reason about).
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    /// Derive an independent sub-stream, e.g. one per pose or per fold.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
        return r.next_u64();
    }

    /// Fisher-Yates shuffle.
    template <typename Container>
    void shuffle(Container& c) {
        for (std::size_t i = c.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(c[i - 1], c[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace curbsight
