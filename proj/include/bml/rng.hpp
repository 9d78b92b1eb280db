#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace bml {

/// Seed for a reproducible random stream. Identical (seed, stream) pairs
/// yield identical sample sequences on every platform.
struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

namespace detail {

// SplitMix64 finalizer (Stafford mix 13). Bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

} // namespace detail

/// Counter-based pseudo random generator. The output at position i is a
/// pure hash of (key, i), so streams can be split arbitrarily and values
/// can also be looked up out of order via `at()`. No state beyond the
/// counter; draws are identical regardless of evaluation order.
class CounterRng {
public:
    CounterRng() : CounterRng(RngSeed{}) {}
    explicit CounterRng(RngSeed s)
        : key_(derive_key(s.seed, s.stream)), counter_(0) {}

    /// Independent child stream; `substream` values give disjoint streams.
    CounterRng split(std::uint64_t substream) const {
        CounterRng child;
        child.key_ = detail::mix64(key_ ^ detail::mix64(substream * detail::kGolden + 0x6a09e667f3bcc909ULL));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return at(counter_++); }

    /// Stateless lookup: the value this stream produces at position i.
    std::uint64_t at(std::uint64_t i) const {
        return detail::mix64(key_ ^ detail::mix64(i + detail::kGolden));
    }

    /// Uniform in [0,1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Unbiased (Lemire with rejection).
    std::uint64_t next_below(std::uint64_t n) {
        using u128 = unsigned __int128;
        std::uint64_t x = next_u64();
        u128 m = static_cast<u128>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<u128>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Exponential variate with the given rate.
    double exponential(double rate) {
        return -std::log1p(-next_double()) / rate;
    }

    std::uint64_t counter() const { return counter_; }

    /// Pure keyed hash, for site-indexed fields sampled lazily (coin fields,
    /// bond configurations coupled across geometries).
    static std::uint64_t hash(std::uint64_t key, std::uint64_t x) {
        return detail::mix64(key ^ detail::mix64(x + detail::kGolden));
    }

    static double hash_double(std::uint64_t key, std::uint64_t x) {
        return static_cast<double>(hash(key, x) >> 11) * 0x1.0p-53;
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t a = detail::mix64(seed + detail::kGolden);
        std::uint64_t b = detail::mix64(stream + 0xbb67ae8584caa73bULL);
        return detail::mix64(a ^ (b * 0x9e3779b97f4a7c15ULL + 1));
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace bml
