#ifndef EQRL_RNG_HPP
#define EQRL_RNG_HPP

#include <cstdint>
#include <string_view>

namespace eqrl {

// xoshiro256++ seeded through splitmix64, with labeled stream derivation.
// Every component that consumes randomness (policy, environment, encryption,
// key generation) gets its own stream via split(), so adding draws in one
// component never perturbs another. Fixed seed -> bit-identical sequences.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
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

    // Uniform double in [0, 1) with 53 bits of precision.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t next_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n; // 2^64 mod n
        uint64_t r;
        do {
            r = next_u64();
        } while (r < threshold);
        return r % n;
    }

    // Derive an independent child stream. Children with distinct labels are
    // decorrelated; the parent state is consumed once per split.
    Rng split(uint64_t label) {
        uint64_t x = next_u64() ^ (0x9e3779b97f4a7c15ull * (label + 1));
        Rng child(0);
        for (auto& word : child.s_) word = splitmix64(x);
        return child;
    }

    Rng split(std::string_view label) { return split(fnv1a(label)); }

    static uint64_t fnv1a(std::string_view bytes) {
        uint64_t h = 1469598103934665603ull;
        for (char c : bytes) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    uint64_t s_[4];
};

} // namespace eqrl

#endif
