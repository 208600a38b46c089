#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace fat {

/// Seeded random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; all distributions are implemented
/// here (the std:: distributions are implementation-defined), so a given
/// seed yields the same stream on every platform.
class Rng {
   public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n) without modulo bias.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (no cached second value).
    double normal();
    /// Gamma(shape, 1), Marsaglia-Tsang.
    double gamma(double shape);
    double beta(double a, double b);

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            using std::swap;
            swap(first[i - 1], first[below(i)]);
        }
    }

    /// Independent child stream, e.g. one per fold: seeded by mix(seed, salt).
    static Rng derive(std::uint64_t seed, std::uint64_t salt) { return Rng(mix(seed, salt)); }
    /// SplitMix64 finalizer over (seed, salt).
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt);

   private:
    std::mt19937_64 engine_;
};

}  // namespace fat
