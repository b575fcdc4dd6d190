#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace rt {

// Splitmix64 step; the single mixing primitive behind all randomness.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed-derivation tree: child streams are derived from a parent seed and a
// stream label, so every component of a run draws from its own independent,
// reproducible stream. derive(s, a) == derive(s, a) always; distinct labels
// give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) {
    std::uint64_t s = parent ^ (0xD1342543DE82EF95ULL * (label + 1));
    return splitmix64(s);
}

// Deterministic bit-stable generator. Avoids std::*_distribution, whose
// output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be > 0. Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace rt
