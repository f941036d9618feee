#pragma once

#include <cstdint>
#include <cmath>
#include <utility>

namespace lcmem {

// xoshiro256++ with splitmix64 seeding. std::mt19937_64 would do, but the
// standard leaves the *distributions* implementation-defined, and corpus
// generation promises bit-identical output for a given seed. Everything
// here is fully pinned.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0) {
        uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
        for (auto& word : state_) word = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire multiply-shift; the (negligible)
    // bias is acceptable for sampling, and the output is reproducible.
    uint64_t uniform_int(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. Always consumes exactly two draws so
    // the stream position does not depend on call parity.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; // (0,1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    int sign() { return (next_u64() & 1) ? 1 : -1; }

    // Independent child stream; deterministic given the parent state.
    Rng child(uint64_t tag) { return Rng(next_u64(), tag); }

    template <typename T>
    void shuffle(T* data, size_t n) {
        for (size_t i = n; i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(data[i - 1], data[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t state_[4];
};

} // namespace lcmem
