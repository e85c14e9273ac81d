#pragma once

// Seeded random streams with keyed substream derivation.
//
// Every stream is a xoshiro256** generator whose state is expanded from a
// 64-bit key by SplitMix64. Substreams are derived by hashing the parent
// key together with an ordered list of integers, so a stream for a given
// tuple is independent of the order in which tuples are visited. Uniform
// and Gaussian variates are produced by hand-written transforms so the
// output is identical across standard library implementations.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace kfactor {

namespace detail {

constexpr std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Mixes an ordered sequence of integers into a single 64-bit key.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t state = parent;
    std::uint64_t key = detail::splitmix64_next(state);
    for (std::uint64_t component : path) {
        state = key ^ (component * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
        key = detail::splitmix64_next(state);
    }
    return key;
}

class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed) noexcept : key_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = detail::splitmix64_next(sm);
    }

    /// Independent stream keyed by this stream's seed and `path`. Does not
    /// consume or depend on the parent's current position.
    [[nodiscard]] RandomStream substream(std::initializer_list<std::uint64_t> path) const noexcept {
        return RandomStream(derive_key(key_, path));
    }

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
            if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double gaussian() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - uniform() lies in (0, 1], keeping the log finite.
        const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace kfactor
