#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bmt {

/// splitmix64 pseudo-random generator (Vigna's published constants).
///
/// Chosen over <random> engines because its output is bit-exact across
/// implementations, which keeps seeded reports byte-stable.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n). Modulo bias is irrelevant at the sample counts
    /// used here and keeps the draw sequence trivially portable.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double a = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Derives an independent substream seed; used to give each experiment
    /// component (data input, validation draws, ...) its own stream.
    std::uint64_t fork() { return next(); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace bmt
