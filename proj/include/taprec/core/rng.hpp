#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace taprec {

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic, platform-independent RNG (xoshiro256++). The standard
// <random> distributions are implementation-defined, which would break the
// bit-reproducibility contract, so uniform/normal/shuffle are provided here.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed) {
        uint64_t sm = seed;
        for (auto& word : s_) word = detail::splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // Lemire's multiply-shift rejection method, no modulo bias.
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * span;
        uint64_t l = static_cast<uint64_t>(m);
        if (l < span) {
            const uint64_t floor = (0ULL - span) % span;
            while (l < floor) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * span;
                l = static_cast<uint64_t>(m);
            }
        }
        return lo + static_cast<int64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the second value is cached so consecutive draws pair up.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Derives an independent substream. Forks from the same (seed, tag) pair
    // are identical; distinct tags decorrelate even for adjacent seeds.
    Rng fork(uint64_t tag) const {
        uint64_t mix = seed_;
        detail::splitmix64(mix);
        mix ^= 0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL;
        return Rng(detail::splitmix64(mix));
    }

    uint64_t seed() const { return seed_; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t s_[4] = {};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace taprec
