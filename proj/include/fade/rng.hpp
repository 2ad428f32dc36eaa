#pragma once

#include <cstdint>

namespace fade {

__extension__ typedef unsigned __int128 u128;

/// SplitMix64: 64-bit state, fully specified arithmetic, so sequences are
/// identical on every platform. split() derives an independent stream.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    constexpr double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    constexpr bool bernoulli(double p) noexcept { return uniform01() < p; }

    /// Uniform in [0, bound); bound == 0 yields 0.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>((static_cast<u128>(next()) * bound) >> 64);
    }

    constexpr SplitMix64 split() noexcept { return SplitMix64(next() ^ 0x6A09E667F3BCC909ull); }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// Stateless mix of two values into a seed.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    SplitMix64 g(a ^ (b * 0xD1B54A32D192ED03ull));
    g.next();
    return g.next();
}

}  // namespace fade
