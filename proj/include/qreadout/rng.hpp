#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace qreadout {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream. mt19937_64 is fully specified by the
/// standard and the Gaussian draw is an explicit Box-Muller transform, so a
/// seed reproduces the identical sample sequence on every platform
/// (std::normal_distribution would not: its algorithm is
/// implementation-defined).
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Substream for (seed, index) pairs, e.g. one per repetition.
    static RngStream derived(std::uint64_t seed, std::uint64_t stream_index) {
        std::uint64_t s = seed;
        detail::splitmix64(s);
        s ^= 0xD1B54A32D192ED03ULL * (stream_index + 1);
        return RngStream(detail::splitmix64(s));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Pair of independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair() {
        // u1 in (0, 1] so the log is finite.
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(t), r * std::sin(t)};
    }

    double normal() { return normal_pair().first; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace qreadout
