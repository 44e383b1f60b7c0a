#pragma once

#include <cmath>
#include <cstdint>

namespace dnfs {

/// SplitMix64 generator. Self-contained so that generated datasets, weight
/// initialization and shuffles are reproducible independent of the standard
/// library implementation.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, bound). Modulo bias is negligible at our sizes.
    std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent stream seed from (seed, stream index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0xA24BAED4963EE407ull + stream * 0x9E3779B97F4A7C15ull));
    g.next();
    return g.next();
}

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename RandomIt>
void deterministic_shuffle(RandomIt first, RandomIt last, SplitMix64& rng) {
    const auto count = last - first;
    for (auto i = count - 1; i > 0; --i) {
        const auto j = static_cast<decltype(i)>(rng.below(std::uint64_t(i) + 1));
        if (j != i) std::swap(first[i], first[j]);
    }
}

}  // namespace dnfs
