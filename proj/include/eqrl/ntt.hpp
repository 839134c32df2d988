#ifndef EQRL_NTT_HPP
#define EQRL_NTT_HPP

#include <cstdint>
#include <cstddef>
#include <vector>

#include "eqrl/fault.hpp"
#include "eqrl/modmath.hpp"

namespace eqrl {

// Negacyclic number-theoretic transform over Z_q[x]/(x^N + 1), N a power of
// two, q = 1 (mod 2N). Pointwise products in the transformed domain are
// negacyclic convolutions in the coefficient domain. Forward is Cooley-Tukey
// with psi powers in bit-reversed order, inverse is Gentleman-Sande; the
// intermediate ordering cancels between the two.
struct NttTables {
    uint64_t q = 0;
    std::size_t n = 0;
    uint64_t psi = 0;              // primitive 2N-th root of unity mod q
    uint64_t n_inv = 0;            // N^{-1} mod q
    std::vector<uint64_t> psi_br;  // psi^{bitrev(i)}
    std::vector<uint64_t> psi_inv_br;

    NttTables() = default;

    NttTables(uint64_t q_, std::size_t n_) : q(q_), n(n_) {
        if (n == 0 || (n & (n - 1)) != 0) fault(FaultCode::bad_argument, "NttTables: N must be a power of two");
        psi = primitive_root_2n(q, 2 * static_cast<uint64_t>(n));
        n_inv = inv_mod(static_cast<uint64_t>(n), q);
        const uint64_t psi_inv = inv_mod(psi, q);
        psi_br.resize(n);
        psi_inv_br.resize(n);
        int log_n = 0;
        while ((std::size_t{1} << log_n) < n) ++log_n;
        uint64_t fwd = 1, inv = 1;
        std::vector<uint64_t> pow_fwd(n), pow_inv(n);
        for (std::size_t i = 0; i < n; ++i) {
            pow_fwd[i] = fwd;
            pow_inv[i] = inv;
            fwd = mul_mod(fwd, psi, q);
            inv = mul_mod(inv, psi_inv, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < log_n; ++b) r |= ((i >> b) & 1) << (log_n - 1 - b);
            psi_br[i] = pow_fwd[r];
            psi_inv_br[i] = pow_inv[r];
        }
    }
};

inline void ntt_forward(const NttTables& t, uint64_t* a) {
    const uint64_t q = t.q;
    std::size_t len = t.n;
    for (std::size_t m = 1; m < t.n; m <<= 1) {
        len >>= 1;
        for (std::size_t i = 0; i < m; ++i) {
            const uint64_t s = t.psi_br[m + i];
            uint64_t* lo = a + 2 * i * len;
            uint64_t* hi = lo + len;
            for (std::size_t j = 0; j < len; ++j) {
                const uint64_t u = lo[j];
                const uint64_t v = mul_mod(hi[j], s, q);
                lo[j] = add_mod(u, v, q);
                hi[j] = sub_mod(u, v, q);
            }
        }
    }
}

inline void ntt_inverse(const NttTables& t, uint64_t* a) {
    const uint64_t q = t.q;
    std::size_t len = 1;
    for (std::size_t m = t.n; m > 1; m >>= 1) {
        const std::size_t h = m >> 1;
        std::size_t j1 = 0;
        for (std::size_t i = 0; i < h; ++i) {
            const uint64_t s = t.psi_inv_br[h + i];
            uint64_t* lo = a + j1;
            uint64_t* hi = lo + len;
            for (std::size_t j = 0; j < len; ++j) {
                const uint64_t u = lo[j];
                const uint64_t v = hi[j];
                lo[j] = add_mod(u, v, q);
                hi[j] = mul_mod(sub_mod(u, v, q), s, q);
            }
            j1 += 2 * len;
        }
        len <<= 1;
    }
    for (std::size_t j = 0; j < t.n; ++j) a[j] = mul_mod(a[j], t.n_inv, q);
}

// Negacyclic product via NTT; operands in coefficient domain.
inline std::vector<uint64_t> ntt_multiply(const NttTables& t,
                                          std::vector<uint64_t> a,
                                          std::vector<uint64_t> b) {
    if (a.size() != t.n || b.size() != t.n) fault(FaultCode::bad_argument, "ntt_multiply: size mismatch");
    ntt_forward(t, a.data());
    ntt_forward(t, b.data());
    for (std::size_t i = 0; i < t.n; ++i) a[i] = mul_mod(a[i], b[i], t.q);
    ntt_inverse(t, a.data());
    return a;
}

} // namespace eqrl

#endif
