#pragma once

#include <cstdint>
#include <limits>

namespace otm {

// SplitMix64 finalizer. Used to expand seeds and to derive independent
// sub-seeds (e.g. one per cross-validation ordering).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Sub-seed for stream `index` of a master seed. Stable across releases:
// re-running a single ordering reproduces its slice of a full run.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master ^ mix64(index + 1));
}

// xoshiro256** generator seeded through SplitMix64. Bit-reproducible on
// every platform, unlike the std:: distributions.
class Randomizer {
public:
    using result_type = std::uint64_t;

    explicit Randomizer(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        seed_ = seed;
        std::uint64_t x = seed;
        for (auto& word : s_) {
            word = mix64(x);
            x += 0x9E3779B97F4A7C15ULL;
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t seed() const noexcept { return seed_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // p <= 0 never fires, p >= 1 always fires.
    bool bernoulli(double p) noexcept { return uniform() < p; }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t r;
        do {
            r = next();
        } while (r >= limit);
        return r % bound;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {};
};

}  // namespace otm
