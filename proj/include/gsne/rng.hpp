#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gsne {

// splitmix64: used to expand a user seed into stream states.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** with explicit, serializable state. All randomness in the
// project flows through this so runs are reproducible bit-for-bit across
// platforms and across checkpoint/restore.
class rng {
public:
    using result_type = std::uint64_t;

    rng() : rng(0) {}

    // stream lets several independent generators be derived from one seed.
    explicit rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL * (stream + 1));
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be > 0. Rejection-free modulo bias is
    // negligible for n far below 2^64 but we use Lemire's trick anyway.
    std::uint64_t uniform_index(std::uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, cache holds the second.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    std::array<std::uint64_t, 4> save_state() const { return state_; }
    bool has_cached_normal() const { return has_cached_; }
    double cached_normal() const { return cached_; }

    void restore_state(const std::array<std::uint64_t, 4>& s, bool has_cached, double cached) {
        state_ = s;
        has_cached_ = has_cached;
        cached_ = cached;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    bool has_cached_ = false;
    double cached_ = 0.0;
};

} // namespace gsne
