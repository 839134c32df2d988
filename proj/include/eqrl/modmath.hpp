#ifndef EQRL_MODMATH_HPP
#define EQRL_MODMATH_HPP

#include <cstdint>
#include <vector>

#include "eqrl/fault.hpp"

namespace eqrl {

// Modular arithmetic on word-sized odd moduli (all chain primes are < 2^51,
// so a 128-bit intermediate product never overflows).

inline uint64_t add_mod(uint64_t a, uint64_t b, uint64_t q) {
    uint64_t s = a + b; // a,b < q < 2^51, no wrap
    return s >= q ? s - q : s;
}

inline uint64_t sub_mod(uint64_t a, uint64_t b, uint64_t q) {
    return a >= b ? a - b : a + q - b;
}

inline uint64_t mul_mod(uint64_t a, uint64_t b, uint64_t q) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(a) * b) % q);
}

inline uint64_t pow_mod(uint64_t base, uint64_t exp, uint64_t q) {
    uint64_t acc = 1 % q;
    uint64_t cur = base % q;
    while (exp != 0) {
        if (exp & 1) acc = mul_mod(acc, cur, q);
        cur = mul_mod(cur, cur, q);
        exp >>= 1;
    }
    return acc;
}

// Inverse modulo a prime q via Fermat.
inline uint64_t inv_mod(uint64_t a, uint64_t q) {
    if (a % q == 0) fault(FaultCode::bad_argument, "inv_mod: zero has no inverse");
    return pow_mod(a % q, q - 2, q);
}

// Deterministic Miller-Rabin, valid for all n < 3.3e24 with this base set.
inline bool is_prime(uint64_t n) {
    if (n < 2) return false;
    for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n % p == 0) return n == p;
    }
    uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) { d >>= 1; ++r; }
    for (uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        uint64_t x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) { composite = false; break; }
        }
        if (composite) return false;
    }
    return true;
}

// Primes p = 1 (mod modulus_step) nearest to `target`, ordered by distance.
// NTT over Z[x]/(x^N+1) needs p = 1 (mod 2N); keeping scale primes nearest
// to the scale keeps tracked-scale drift per rescale tiny.
inline std::vector<uint64_t> find_ntt_primes(uint64_t target, uint64_t modulus_step,
                                             std::size_t count,
                                             const std::vector<uint64_t>& exclude = {}) {
    std::vector<uint64_t> found;
    auto excluded = [&](uint64_t p) {
        for (uint64_t e : exclude) if (e == p) return true;
        for (uint64_t e : found) if (e == p) return true;
        return false;
    };
    const uint64_t base = target / modulus_step * modulus_step + 1;
    for (uint64_t d = 0; found.size() < count; ++d) {
        if (d > (uint64_t{1} << 28)) fault(FaultCode::internal, "find_ntt_primes: search overran");
        if (d == 0) {
            if (is_prime(base) && !excluded(base)) found.push_back(base);
            continue;
        }
        const uint64_t lo = base - d * modulus_step;
        const uint64_t hi = base + d * modulus_step;
        if (lo < base && is_prime(lo) && !excluded(lo)) found.push_back(lo);
        if (found.size() < count && is_prime(hi) && !excluded(hi)) found.push_back(hi);
    }
    // Order strictly by |p - target| so selection is deterministic.
    for (std::size_t i = 0; i < found.size(); ++i) {
        for (std::size_t j = i + 1; j < found.size(); ++j) {
            auto dist = [&](uint64_t p) { return p > target ? p - target : target - p; };
            if (dist(found[j]) < dist(found[i])) std::swap(found[i], found[j]);
        }
    }
    found.resize(count);
    return found;
}

// Primitive 2N-th root of unity mod prime q (N a power of two, 2N | q-1).
// psi^N = -1 is sufficient: the order divides 2N, and the only power-of-two
// divisor of 2N not dividing N is 2N itself.
inline uint64_t primitive_root_2n(uint64_t q, uint64_t two_n, uint64_t seed = 1) {
    if ((q - 1) % two_n != 0) fault(FaultCode::bad_argument, "primitive_root_2n: 2N does not divide q-1");
    const uint64_t cofactor = (q - 1) / two_n;
    uint64_t r = seed;
    for (int tries = 0; tries < 4096; ++tries) {
        r = r * 6364136223846793005ull + 1442695040888963407ull;
        const uint64_t cand = pow_mod(2 + r % (q - 3), cofactor, q);
        if (pow_mod(cand, two_n / 2, q) == q - 1) return cand;
    }
    fault(FaultCode::internal, "primitive_root_2n: no root found");
}

} // namespace eqrl

#endif
