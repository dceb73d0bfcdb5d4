#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace oodrl {

// splitmix64; also used as the seed-mixing function for derived streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding. All stochastic draws in the project
// go through this generator so that runs are reproducible from a single seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0,1) with 53 random bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in the open interval (0,1); safe under log()
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // standard normal via Box-Muller (no spare caching)
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // uniform integer in [0, n); modulo bias is negligible for the small n used here
    std::uint32_t uniform_int(std::uint32_t n) {
        return static_cast<std::uint32_t>(next_u64() % n);
    }

    // deterministic derivation of a sub-stream seed from a parent seed and a tag
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t s = seed ^ (0x2545f4914f6cdd1dULL * (tag + 1));
        return splitmix64(s);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace oodrl
