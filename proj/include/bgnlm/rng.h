#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace bgnlm {

/// Counter-based generator: output i is a SplitMix64 finalizer applied to key + i * gamma.
/// A (seed, stream) pair fully determines the sequence, so independent chains never share
/// state and results do not depend on scheduling.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : key_(mix(mix(seed) ^ mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

    /// Derive an independent generator; the child's sequence depends only on this
    /// generator's key and the given tag, never on how many draws were made.
    Rng split(std::uint64_t tag) const { return Rng(key_, tag + 1); }

    std::uint64_t counter() const { return counter_; }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return lo + static_cast<std::int64_t>((*this)());
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t draw;
        do {
            draw = (*this)();
        } while (draw >= limit);
        return lo + static_cast<std::int64_t>(draw % span);
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal (Marsaglia polar method, spare value discarded).
    double normal() {
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    /// Draw an index with probability proportional to weights (weights need not be normalized).
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double target = uniform() * total;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            if (target < weights[i]) return i;
            target -= weights[i];
        }
        return last_positive;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace bgnlm
