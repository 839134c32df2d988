#ifndef EQRL_CKKS_HPP
#define EQRL_CKKS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "eqrl/fault.hpp"
#include "eqrl/modmath.hpp"
#include "eqrl/ntt.hpp"
#include "eqrl/rng.hpp"

namespace eqrl {

// ============================================================================
// Parameters
// ============================================================================

// A leveled CKKS-style profile. The modulus chain is [q0, q1, .., qk, special]:
// q0 anchors decryption precision, q1..qk are scale-sized rescale divisors,
// and the special prime is used only inside key switching. No bootstrapping,
// no rotation keys. The test_small profile is for tests and CI only and is
// far below any accepted security level.
struct CkksParams {
    std::string name;
    std::size_t n = 0;                // ring degree, power of two
    std::vector<int> data_bits;       // bit sizes of q0..qk
    int special_bits = 0;
    double scale = 0.0;               // fresh encoding scale (delta)
    double sigma = 3.2;               // noise stddev
    int secret_hamming = 64;          // nonzeros in the ternary secret

    std::size_t slot_count() const { return n / 2; }
};

inline CkksParams params_table1() {
    CkksParams p;
    p.name = "table1";
    p.n = 8192;
    p.data_bits = {50, 30, 30, 30};
    p.special_bits = 50;
    p.scale = static_cast<double>(uint64_t{1} << 30);
    return p;
}

// Insecure toy profile: small ring, shallow chain. Tests and CI only.
inline CkksParams params_test_small() {
    CkksParams p;
    p.name = "test-small";
    p.n = 1024;
    p.data_bits = {40, 30, 30};
    p.special_bits = 40;
    p.scale = static_cast<double>(uint64_t{1} << 30);
    return p;
}

inline CkksParams params_by_name(const std::string& name) {
    if (name == "table1") return params_table1();
    if (name == "test-small") return params_test_small();
    fault(FaultCode::bad_argument, "unknown profile: " + name);
}

// ============================================================================
// RNS polynomial
// ============================================================================

// Row-major residue matrix: rows() moduli, n coefficients each.
struct RnsPoly {
    std::size_t n = 0;
    std::vector<uint64_t> w;

    RnsPoly() = default;
    RnsPoly(std::size_t rows, std::size_t n_) : n(n_), w(rows * n_, 0) {}

    std::size_t rows() const { return n == 0 ? 0 : w.size() / n; }
    uint64_t* row(std::size_t i) { return w.data() + i * n; }
    const uint64_t* row(std::size_t i) const { return w.data() + i * n; }

    void drop_last_row() { w.resize(w.size() - n); }
};

// ============================================================================
// Context
// ============================================================================

class CkksContext {
public:
    explicit CkksContext(CkksParams params) : params_(std::move(params)) {
        const std::size_t n = params_.n;
        if (n < 8 || (n & (n - 1)) != 0) fault(FaultCode::bad_argument, "ring degree must be a power of two >= 8");
        if (params_.data_bits.size() < 2) fault(FaultCode::bad_argument, "modulus chain too short");

        // Choose distinct primes = 1 (mod 2N) nearest to each 2^bits target.
        // Scale-sized groups are assigned so the prime nearest the target is
        // dropped first; tracked-scale drift per rescale stays minimal.
        std::vector<int> all_bits = params_.data_bits;
        all_bits.push_back(params_.special_bits);
        std::vector<uint64_t> chosen(all_bits.size(), 0);
        std::vector<uint64_t> used;
        for (int bits = 20; bits <= 60; ++bits) {
            std::vector<std::size_t> positions;
            for (std::size_t i = 0; i < all_bits.size(); ++i)
                if (all_bits[i] == bits) positions.push_back(i);
            if (positions.empty()) continue;
            auto primes = find_ntt_primes(uint64_t{1} << bits, 2 * n, positions.size(), used);
            // Later data positions rescale earlier and want minimal drift, so
            // they take the closer primes; the special prime takes what's left.
            std::vector<std::size_t> order;
            for (auto it = positions.rbegin(); it != positions.rend(); ++it)
                if (*it < params_.data_bits.size()) order.push_back(*it);
            for (std::size_t pos : positions)
                if (pos >= params_.data_bits.size()) order.push_back(pos);
            for (std::size_t k = 0; k < order.size(); ++k) {
                chosen[order[k]] = primes[k];
                used.push_back(primes[k]);
            }
        }
        data_primes_.assign(chosen.begin(), chosen.end() - 1);
        special_prime_ = chosen.back();

        all_moduli_ = data_primes_;
        all_moduli_.push_back(special_prime_);
        for (uint64_t q : all_moduli_) ntt_.emplace_back(q, n);

        special_mod_data_.resize(data_primes_.size());
        special_inv_mod_data_.resize(data_primes_.size());
        for (std::size_t j = 0; j < data_primes_.size(); ++j) {
            special_mod_data_[j] = special_prime_ % data_primes_[j];
            special_inv_mod_data_[j] = inv_mod(special_mod_data_[j], data_primes_[j]);
        }
        // inv_data_[i][j] = data[i]^{-1} mod data[j], for rescale by data[i].
        inv_data_.resize(data_primes_.size());
        for (std::size_t i = 0; i < data_primes_.size(); ++i) {
            inv_data_[i].resize(data_primes_.size(), 0);
            for (std::size_t j = 0; j < data_primes_.size(); ++j)
                if (i != j) inv_data_[i][j] = inv_mod(data_primes_[i] % data_primes_[j], data_primes_[j]);
        }

        init_fft();
        params_hash_ = compute_params_hash();
    }

    const CkksParams& params() const { return params_; }
    std::size_t n() const { return params_.n; }
    std::size_t slot_count() const { return params_.n / 2; }
    const std::vector<uint64_t>& data_primes() const { return data_primes_; }
    uint64_t special_prime() const { return special_prime_; }
    const std::vector<uint64_t>& all_moduli() const { return all_moduli_; }
    const NttTables& ntt_data(std::size_t i) const { return ntt_[i]; }
    const NttTables& ntt_special() const { return ntt_.back(); }
    uint64_t params_hash() const { return params_hash_; }

    // Levels consume the chain from the back; level L has data_count - L
    // active data primes. The deepest usable level leaves one prime.
    std::size_t max_level() const { return data_primes_.size() - 1; }
    std::size_t active_count(std::size_t level) const {
        if (level > max_level()) fault(FaultCode::bad_argument, "level beyond chain");
        return data_primes_.size() - level;
    }

    long double active_modulus_product(std::size_t level) const {
        long double p = 1.0L;
        for (std::size_t i = 0; i < active_count(level); ++i) p *= static_cast<long double>(data_primes_[i]);
        return p;
    }

    // --- canonical embedding -------------------------------------------------

    // decode direction: slot_j = m(zeta^{2j+1}) / scale, zeta = exp(i*pi/N).
    // Implemented as pre-twist by zeta^k then a size-N FFT with positive sign.
    std::vector<std::complex<double>> embed_forward(const std::vector<double>& coeffs) const {
        const std::size_t n = params_.n;
        std::vector<std::complex<double>> x(n);
        for (std::size_t k = 0; k < n; ++k) x[k] = coeffs[k] * zeta_[k];
        fft(x, +1);
        x.resize(n / 2);
        return x;
    }

    // encode direction: inverse of embed_forward, conjugate-extended.
    std::vector<double> embed_inverse(std::span<const std::complex<double>> slots) const {
        const std::size_t n = params_.n;
        std::vector<std::complex<double>> x(n);
        for (std::size_t j = 0; j < n / 2; ++j) {
            x[j] = slots[j];
            x[n - 1 - j] = std::conj(slots[j]);
        }
        fft(x, -1);
        std::vector<double> coeffs(n);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k)
            coeffs[k] = (x[k] * std::conj(zeta_[k])).real() * inv_n;
        return coeffs;
    }

private:
    void init_fft() {
        const std::size_t n = params_.n;
        zeta_.resize(n);
        tw_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            zeta_[k] = std::polar(1.0, std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
            tw_[k] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
        }
        std::size_t log_n = 0;
        while ((std::size_t{1} << log_n) < n) ++log_n;
        rev_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log_n; ++b) r |= ((i >> b) & 1) << (log_n - 1 - b);
            rev_[i] = r;
        }
    }

    void fft(std::vector<std::complex<double>>& x, int sign) const {
        const std::size_t n = x.size();
        for (std::size_t i = 0; i < n; ++i)
            if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t stride = n / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t j = 0; j < len / 2; ++j) {
                    std::complex<double> w = tw_[j * stride];
                    if (sign < 0) w = std::conj(w);
                    const auto u = x[i + j];
                    const auto v = x[i + j + len / 2] * w;
                    x[i + j] = u + v;
                    x[i + j + len / 2] = u - v;
                }
            }
        }
    }

    uint64_t compute_params_hash() const {
        std::vector<unsigned char> bytes;
        auto put_u64 = [&](uint64_t v) {
            for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
        };
        put_u64(static_cast<uint64_t>(params_.n));
        put_u64(static_cast<uint64_t>(data_primes_.size()));
        for (uint64_t q : data_primes_) put_u64(q);
        put_u64(special_prime_);
        uint64_t scale_bits, sigma_bits;
        std::memcpy(&scale_bits, &params_.scale, 8);
        std::memcpy(&sigma_bits, &params_.sigma, 8);
        put_u64(scale_bits);
        put_u64(sigma_bits);
        return Rng::fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }

    CkksParams params_;
    std::vector<uint64_t> data_primes_;
    uint64_t special_prime_ = 0;
    std::vector<uint64_t> all_moduli_;
    std::vector<NttTables> ntt_;
    std::vector<uint64_t> special_mod_data_, special_inv_mod_data_;
    std::vector<std::vector<uint64_t>> inv_data_;
    std::vector<std::complex<double>> zeta_, tw_;
    std::vector<std::size_t> rev_;
    uint64_t params_hash_ = 0;

    friend struct HeOps;
};

using ContextPtr = std::shared_ptr<const CkksContext>;

inline ContextPtr make_context(const CkksParams& params) {
    return std::make_shared<CkksContext>(params);
}

// ============================================================================
// Plaintext / Ciphertext / keys
// ============================================================================

struct Plaintext {
    ContextPtr ctx;
    std::size_t level = 0;
    double scale = 0.0;
    RnsPoly poly;
};

// components c_i with sum_i c_i s^i = message + noise (mod active primes).
struct Ciphertext {
    ContextPtr ctx;
    std::size_t level = 0;
    double scale = 0.0;
    std::vector<RnsPoly> comps;

    std::size_t size() const { return comps.size(); }
};

// Key-switching key for s^2 -> s. One digit per data prime; each digit is a
// pair of polynomials in NTT form over all moduli (data + special).
struct RelinKey {
    std::vector<RnsPoly> b; // digit -> poly rows over all moduli
    std::vector<RnsPoly> a;
};

struct KeySet {
    ContextPtr ctx;
    RnsPoly secret;       // rows over all moduli, NTT form
    RnsPoly secret_sq;    // s^2, NTT form
    RnsPoly pk_b, pk_a;   // rows over data primes, NTT form
    RelinKey relin;
};

// ============================================================================
// Sampling
// ============================================================================

namespace detail {

// Centered discrete Gaussian by CDF inversion over [-tail, tail].
class GaussianSampler {
public:
    explicit GaussianSampler(double sigma) {
        const int tail = static_cast<int>(std::ceil(sigma * 8));
        long double total = 0.0L;
        std::vector<long double> pdf;
        for (int k = -tail; k <= tail; ++k) {
            const long double p = std::exp(-static_cast<long double>(k) * k / (2.0L * sigma * sigma));
            pdf.push_back(p);
            total += p;
        }
        values_.reserve(pdf.size());
        thresholds_.reserve(pdf.size());
        long double acc = 0.0L;
        for (int k = -tail; k <= tail; ++k) {
            acc += pdf[static_cast<std::size_t>(k + tail)];
            values_.push_back(k);
            const long double frac = acc / total;
            thresholds_.push_back(frac >= 1.0L ? ~uint64_t{0}
                                               : static_cast<uint64_t>(frac * 18446744073709551615.0L));
        }
    }

    int sample(Rng& rng) const {
        const uint64_t u = rng.next_u64();
        auto it = std::lower_bound(thresholds_.begin(), thresholds_.end(), u);
        if (it == thresholds_.end()) --it;
        return values_[static_cast<std::size_t>(it - thresholds_.begin())];
    }

private:
    std::vector<int> values_;
    std::vector<uint64_t> thresholds_;
};

// Signed integer vector -> RNS rows over the given moduli.
inline RnsPoly to_rns(const std::vector<int64_t>& coeffs, const std::vector<uint64_t>& moduli) {
    RnsPoly out(moduli.size(), coeffs.size());
    for (std::size_t i = 0; i < moduli.size(); ++i) {
        const uint64_t q = moduli[i];
        uint64_t* row = out.row(i);
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            const int64_t c = coeffs[k];
            row[k] = c >= 0 ? static_cast<uint64_t>(c) % q
                            : q - (static_cast<uint64_t>(-c) % q);
        }
    }
    return out;
}

inline std::vector<int64_t> sample_gaussian_coeffs(const CkksContext& ctx, Rng& rng) {
    static thread_local double cached_sigma = -1.0;
    static thread_local std::unique_ptr<GaussianSampler> sampler;
    if (!sampler || cached_sigma != ctx.params().sigma) {
        sampler = std::make_unique<GaussianSampler>(ctx.params().sigma);
        cached_sigma = ctx.params().sigma;
    }
    std::vector<int64_t> e(ctx.n());
    for (auto& c : e) c = sampler->sample(rng);
    return e;
}

// Ternary with fixed Hamming weight; positions then signs from the stream.
inline std::vector<int64_t> sample_sparse_ternary(const CkksContext& ctx, Rng& rng, int hamming) {
    const std::size_t n = ctx.n();
    const std::size_t h = std::min<std::size_t>(static_cast<std::size_t>(hamming), n / 2);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<int64_t> out(n, 0);
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t j = i + rng.next_below(n - i);
        std::swap(idx[i], idx[j]);
        out[idx[i]] = (rng.next_u64() & 1) ? 1 : -1;
    }
    return out;
}

inline RnsPoly sample_uniform(const std::vector<uint64_t>& moduli, std::size_t n, Rng& rng) {
    RnsPoly out(moduli.size(), n);
    for (std::size_t i = 0; i < moduli.size(); ++i) {
        uint64_t* row = out.row(i);
        for (std::size_t k = 0; k < n; ++k) row[k] = rng.next_below(moduli[i]);
    }
    return out;
}

} // namespace detail

// ============================================================================
// Encode / decode
// ============================================================================

inline Plaintext encode(const ContextPtr& ctx, std::span<const double> values, double scale,
                        std::size_t level = 0) {
    if (scale <= 1.0) fault(FaultCode::bad_argument, "encode: scale must exceed 1");
    if (values.size() > ctx->slot_count())
        fault(FaultCode::bad_argument, "encode: more values than slots");
    const std::size_t active = ctx->active_count(level);

    std::vector<std::complex<double>> slots(ctx->slot_count(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) fault(FaultCode::bad_argument, "encode: non-finite value");
        slots[i] = values[i] * scale;
    }
    const std::vector<double> coeffs = ctx->embed_inverse(slots);

    const long double q_half = ctx->active_modulus_product(level) / 2.0L;
    const long double bound = std::min<long double>(q_half, 0x1p52L);
    std::vector<int64_t> rounded(coeffs.size());
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        const double c = coeffs[k];
        if (!std::isfinite(c) || std::fabs(static_cast<long double>(c)) >= bound)
            fault(FaultCode::overflow, "encode: coefficient exceeds representable bound");
        rounded[k] = std::llround(c);
    }
    Plaintext pt;
    pt.ctx = ctx;
    pt.level = level;
    pt.scale = scale;
    pt.poly = detail::to_rns(rounded,
                             {ctx->data_primes().begin(), ctx->data_primes().begin() + static_cast<std::ptrdiff_t>(active)});
    return pt;
}

namespace detail {

// Exact CRT reconstruction of one centered coefficient via Garner digits.
// Base order puts the scale primes first so legitimate plaintext magnitudes
// occupy at most the first two digits and convert to long double exactly.
struct GarnerPlan {
    std::vector<uint64_t> base;                 // reordered active primes
    std::vector<std::size_t> src;               // row index in the poly
    std::vector<std::vector<uint64_t>> pref_inv; // pref_inv[i][...] staged inverses

    GarnerPlan(const CkksContext& ctx, std::size_t level) {
        const std::size_t active = ctx.active_count(level);
        for (std::size_t i = 1; i < active; ++i) {
            base.push_back(ctx.data_primes()[i]);
            src.push_back(i);
        }
        base.push_back(ctx.data_primes()[0]);
        src.push_back(0);
        pref_inv.resize(base.size());
        for (std::size_t i = 1; i < base.size(); ++i) {
            uint64_t prod = 1;
            pref_inv[i].resize(i + 1, 0);
            for (std::size_t m = 0; m < i; ++m) prod = mul_mod(prod, base[m] % base[i], base[i]);
            pref_inv[i][i] = inv_mod(prod, base[i]);
        }
    }

    // digits of value mod prod(base) in mixed radix
    void digits(const std::vector<uint64_t>& residues, std::vector<uint64_t>& out) const {
        const std::size_t k = base.size();
        out.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            uint64_t x = residues[i] % base[i];
            // subtract already-known digits: x -= d0 + b0*(d1 + ...) mod base[i]
            uint64_t acc = 0;
            for (std::size_t m = i; m-- > 0;) acc = add_mod(mul_mod(acc, base[m] % base[i], base[i]), out[m] % base[i], base[i]);
            x = sub_mod(x, acc, base[i]);
            out[i] = (i == 0) ? x : mul_mod(x, pref_inv[i][i], base[i]);
        }
    }

    long double magnitude(const std::vector<uint64_t>& digit) const {
        long double v = 0.0L, radix = 1.0L;
        for (std::size_t i = 0; i < base.size(); ++i) {
            v += radix * static_cast<long double>(digit[i]);
            radix *= static_cast<long double>(base[i]);
        }
        return v;
    }
};

} // namespace detail

inline std::vector<std::complex<double>> decode_complex(const Plaintext& pt) {
    const CkksContext& ctx = *pt.ctx;
    const std::size_t n = ctx.n();
    const std::size_t active = ctx.active_count(pt.level);
    detail::GarnerPlan plan(ctx, pt.level);

    std::vector<double> coeffs(n);
    std::vector<uint64_t> pos(active), neg(active), dp(active), dn(active);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < active; ++i) {
            const uint64_t q = plan.base[i];
            const uint64_t r = pt.poly.row(plan.src[i])[k];
            pos[i] = r;
            neg[i] = r == 0 ? 0 : q - r;
        }
        plan.digits(pos, dp);
        plan.digits(neg, dn);
        const long double vp = plan.magnitude(dp);
        const long double vn = plan.magnitude(dn);
        coeffs[k] = vp <= vn ? static_cast<double>(vp) : -static_cast<double>(vn);
    }
    auto slots = ctx.embed_forward(coeffs);
    const double inv_scale = 1.0 / pt.scale;
    for (auto& s : slots) s *= inv_scale;
    return slots;
}

inline std::vector<double> decode(const Plaintext& pt) {
    const auto slots = decode_complex(pt);
    std::vector<double> out(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) out[i] = slots[i].real();
    return out;
}

// ============================================================================
// Keygen / encrypt / decrypt
// ============================================================================

inline KeySet keygen(const ContextPtr& ctx, Rng& rng) {
    Rng kg = rng.split("keygen");
    KeySet keys;
    keys.ctx = ctx;
    const std::vector<uint64_t>& all = ctx->all_moduli();
    const std::vector<uint64_t>& data = ctx->data_primes();
    const std::size_t n = ctx->n();
    const std::size_t d = data.size();

    const auto s_coeffs = detail::sample_sparse_ternary(*ctx, kg, ctx->params().secret_hamming);
    keys.secret = detail::to_rns(s_coeffs, all);
    for (std::size_t i = 0; i < all.size(); ++i) {
        const NttTables& t = (i < d) ? ctx->ntt_data(i) : ctx->ntt_special();
        ntt_forward(t, keys.secret.row(i));
    }
    keys.secret_sq = keys.secret;
    for (std::size_t i = 0; i < all.size(); ++i) {
        uint64_t* row = keys.secret_sq.row(i);
        const uint64_t* s = keys.secret.row(i);
        for (std::size_t k = 0; k < n; ++k) row[k] = mul_mod(s[k], s[k], all[i]);
    }

    // Public key over the data primes: (b, a) with b = -a*s + e.
    {
        RnsPoly a = detail::sample_uniform(data, n, kg);
        for (std::size_t i = 0; i < d; ++i) ntt_forward(ctx->ntt_data(i), a.row(i));
        RnsPoly e = detail::to_rns(detail::sample_gaussian_coeffs(*ctx, kg), data);
        for (std::size_t i = 0; i < d; ++i) ntt_forward(ctx->ntt_data(i), e.row(i));
        RnsPoly b(d, n);
        for (std::size_t i = 0; i < d; ++i) {
            const uint64_t q = data[i];
            for (std::size_t k = 0; k < n; ++k)
                b.row(i)[k] = add_mod(sub_mod(0, mul_mod(a.row(i)[k], keys.secret.row(i)[k], q), q), e.row(i)[k], q);
        }
        keys.pk_a = std::move(a);
        keys.pk_b = std::move(b);
    }

    // Relin key: digit i carries p * s^2 in the q_i component only.
    keys.relin.a.resize(d);
    keys.relin.b.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        RnsPoly a = detail::sample_uniform(all, n, kg);
        for (std::size_t m = 0; m < all.size(); ++m) {
            const NttTables& t = (m < d) ? ctx->ntt_data(m) : ctx->ntt_special();
            ntt_forward(t, a.row(m));
        }
        RnsPoly e = detail::to_rns(detail::sample_gaussian_coeffs(*ctx, kg), all);
        for (std::size_t m = 0; m < all.size(); ++m) {
            const NttTables& t = (m < d) ? ctx->ntt_data(m) : ctx->ntt_special();
            ntt_forward(t, e.row(m));
        }
        RnsPoly b(all.size(), n);
        for (std::size_t m = 0; m < all.size(); ++m) {
            const uint64_t q = all[m];
            const uint64_t p_mod = ctx->special_prime() % q; // 0 when m is the special row
            for (std::size_t k = 0; k < n; ++k) {
                uint64_t v = add_mod(sub_mod(0, mul_mod(a.row(m)[k], keys.secret.row(m)[k], q), q), e.row(m)[k], q);
                if (m == i) v = add_mod(v, mul_mod(p_mod, keys.secret_sq.row(m)[k], q), q);
                b.row(m)[k] = v;
            }
        }
        keys.relin.a[i] = std::move(a);
        keys.relin.b[i] = std::move(b);
    }
    return keys;
}

namespace detail {

inline void validate_pt_for_encrypt(const Plaintext& pt) {
    if (!pt.ctx) fault(FaultCode::bad_argument, "encrypt: empty plaintext");
}

} // namespace detail

// Secret-key encryption: the client owns the secret key and is the only
// encryptor in the protocol, so fresh noise is a single Gaussian sample.
inline Ciphertext encrypt(const KeySet& keys, const Plaintext& pt, Rng& rng) {
    detail::validate_pt_for_encrypt(pt);
    const CkksContext& ctx = *pt.ctx;
    const std::size_t active = ctx.active_count(pt.level);
    const std::size_t n = ctx.n();
    Rng er = rng.split("enc");

    std::vector<uint64_t> moduli(ctx.data_primes().begin(),
                                 ctx.data_primes().begin() + static_cast<std::ptrdiff_t>(active));
    RnsPoly a = detail::sample_uniform(moduli, n, er);
    for (std::size_t i = 0; i < active; ++i) ntt_forward(ctx.ntt_data(i), a.row(i));
    RnsPoly e = detail::to_rns(detail::sample_gaussian_coeffs(ctx, er), moduli);

    Ciphertext ct;
    ct.ctx = pt.ctx;
    ct.level = pt.level;
    ct.scale = pt.scale;
    ct.comps.resize(2);
    ct.comps[1] = a;
    RnsPoly c0(active, n);
    for (std::size_t i = 0; i < active; ++i) {
        const uint64_t q = moduli[i];
        // c0 = m + e - a*s  (a*s computed in NTT domain)
        std::vector<uint64_t> as(a.row(i), a.row(i) + n);
        for (std::size_t k = 0; k < n; ++k) as[k] = mul_mod(as[k], keys.secret.row(i)[k], q);
        ntt_inverse(ctx.ntt_data(i), as.data());
        for (std::size_t k = 0; k < n; ++k)
            c0.row(i)[k] = sub_mod(add_mod(pt.poly.row(i)[k], e.row(i)[k], q), as[k], q);
    }
    ct.comps[0] = std::move(c0);
    for (std::size_t i = 0; i < active; ++i) ntt_inverse(ctx.ntt_data(i), ct.comps[1].row(i));
    return ct;
}

// Conventional RLWE public-key encryption; noisier than the secret-key path.
inline Ciphertext encrypt_public(const KeySet& keys, const Plaintext& pt, Rng& rng) {
    detail::validate_pt_for_encrypt(pt);
    const CkksContext& ctx = *pt.ctx;
    const std::size_t active = ctx.active_count(pt.level);
    const std::size_t n = ctx.n();
    Rng er = rng.split("enc-pk");

    std::vector<uint64_t> moduli(ctx.data_primes().begin(),
                                 ctx.data_primes().begin() + static_cast<std::ptrdiff_t>(active));
    RnsPoly u = detail::to_rns(detail::sample_sparse_ternary(ctx, er, ctx.params().secret_hamming), moduli);
    for (std::size_t i = 0; i < active; ++i) ntt_forward(ctx.ntt_data(i), u.row(i));
    RnsPoly e0 = detail::to_rns(detail::sample_gaussian_coeffs(ctx, er), moduli);
    RnsPoly e1 = detail::to_rns(detail::sample_gaussian_coeffs(ctx, er), moduli);

    Ciphertext ct;
    ct.ctx = pt.ctx;
    ct.level = pt.level;
    ct.scale = pt.scale;
    ct.comps.assign(2, RnsPoly(active, n));
    for (std::size_t i = 0; i < active; ++i) {
        const uint64_t q = moduli[i];
        std::vector<uint64_t> t0(n), t1(n);
        for (std::size_t k = 0; k < n; ++k) {
            t0[k] = mul_mod(keys.pk_b.row(i)[k], u.row(i)[k], q);
            t1[k] = mul_mod(keys.pk_a.row(i)[k], u.row(i)[k], q);
        }
        ntt_inverse(ctx.ntt_data(i), t0.data());
        ntt_inverse(ctx.ntt_data(i), t1.data());
        for (std::size_t k = 0; k < n; ++k) {
            ct.comps[0].row(i)[k] = add_mod(add_mod(t0[k], e0.row(i)[k], q), pt.poly.row(i)[k], q);
            ct.comps[1].row(i)[k] = add_mod(t1[k], e1.row(i)[k], q);
        }
    }
    return ct;
}

inline Plaintext decrypt(const KeySet& keys, const Ciphertext& ct) {
    if (ct.comps.empty() || ct.comps.size() > 3)
        fault(FaultCode::bad_argument, "decrypt: unsupported component count");
    const CkksContext& ctx = *ct.ctx;
    const std::size_t active = ctx.active_count(ct.level);
    const std::size_t n = ctx.n();

    Plaintext pt;
    pt.ctx = ct.ctx;
    pt.level = ct.level;
    pt.scale = ct.scale;
    pt.poly = RnsPoly(active, n);
    for (std::size_t i = 0; i < active; ++i) {
        const uint64_t q = ctx.data_primes()[i];
        std::vector<uint64_t> acc(ct.comps[0].row(i), ct.comps[0].row(i) + n);
        std::vector<uint64_t> c1(ct.comps[1].row(i), ct.comps[1].row(i) + n);
        ntt_forward(ctx.ntt_data(i), c1.data());
        for (std::size_t k = 0; k < n; ++k) c1[k] = mul_mod(c1[k], keys.secret.row(i)[k], q);
        if (ct.comps.size() == 3) {
            std::vector<uint64_t> c2(ct.comps[2].row(i), ct.comps[2].row(i) + n);
            ntt_forward(ctx.ntt_data(i), c2.data());
            for (std::size_t k = 0; k < n; ++k)
                c1[k] = add_mod(c1[k], mul_mod(c2[k], keys.secret_sq.row(i)[k], q), q);
        }
        ntt_inverse(ctx.ntt_data(i), c1.data());
        for (std::size_t k = 0; k < n; ++k) pt.poly.row(i)[k] = add_mod(acc[k], c1[k], q);
    }
    return pt;
}

// ============================================================================
// Homomorphic operations
// ============================================================================

namespace detail {

inline void require_same_ctx(const Ciphertext& x, const Ciphertext& y, const char* op) {
    if (x.ctx.get() != y.ctx.get())
        fault(FaultCode::bad_argument, std::string(op) + ": operands from different contexts");
    if (x.level != y.level)
        fault(FaultCode::bad_state, std::string(op) + ": level mismatch, mod_switch_to the deeper level first");
}

inline void require_scale_match(const Ciphertext& x, const Ciphertext& y, const char* op) {
    const double ratio = x.scale / y.scale;
    if (!(std::fabs(std::log2(ratio)) <= 0x1p-10))
        fault(FaultCode::bad_state,
              std::string(op) + ": scale mismatch beyond 2^-10, rescale or re-encode first");
}

} // namespace detail

inline Ciphertext he_add(const Ciphertext& x, const Ciphertext& y) {
    detail::require_same_ctx(x, y, "he_add");
    detail::require_scale_match(x, y, "he_add");
    if (x.size() != y.size()) fault(FaultCode::bad_state, "he_add: component count mismatch");
    const CkksContext& ctx = *x.ctx;
    const std::size_t active = ctx.active_count(x.level);
    Ciphertext out = x;
    out.scale = std::max(x.scale, y.scale);
    for (std::size_t c = 0; c < out.comps.size(); ++c) {
        for (std::size_t i = 0; i < active; ++i) {
            const uint64_t q = ctx.data_primes()[i];
            uint64_t* o = out.comps[c].row(i);
            const uint64_t* b = y.comps[c].row(i);
            for (std::size_t k = 0; k < ctx.n(); ++k) o[k] = add_mod(o[k], b[k], q);
        }
    }
    return out;
}

inline Ciphertext he_sub(const Ciphertext& x, const Ciphertext& y) {
    detail::require_same_ctx(x, y, "he_sub");
    detail::require_scale_match(x, y, "he_sub");
    if (x.size() != y.size()) fault(FaultCode::bad_state, "he_sub: component count mismatch");
    const CkksContext& ctx = *x.ctx;
    const std::size_t active = ctx.active_count(x.level);
    Ciphertext out = x;
    out.scale = std::max(x.scale, y.scale);
    for (std::size_t c = 0; c < out.comps.size(); ++c) {
        for (std::size_t i = 0; i < active; ++i) {
            const uint64_t q = ctx.data_primes()[i];
            uint64_t* o = out.comps[c].row(i);
            const uint64_t* b = y.comps[c].row(i);
            for (std::size_t k = 0; k < ctx.n(); ++k) o[k] = sub_mod(o[k], b[k], q);
        }
    }
    return out;
}

// Tensor product of two degree-1 ciphertexts; result has three components
// and scale = sx * sy. Relinearize before further multiplications.
inline Ciphertext he_mul(const Ciphertext& x, const Ciphertext& y) {
    detail::require_same_ctx(x, y, "he_mul");
    if (x.size() != 2 || y.size() != 2)
        fault(FaultCode::bad_state, "he_mul: operands must have two components, relinearize first");
    const CkksContext& ctx = *x.ctx;
    const std::size_t active = ctx.active_count(x.level);
    const std::size_t n = ctx.n();

    Ciphertext out;
    out.ctx = x.ctx;
    out.level = x.level;
    out.scale = x.scale * y.scale;
    out.comps.assign(3, RnsPoly(active, n));
    for (std::size_t i = 0; i < active; ++i) {
        const NttTables& t = ctx.ntt_data(i);
        const uint64_t q = t.q;
        std::vector<uint64_t> x0(x.comps[0].row(i), x.comps[0].row(i) + n);
        std::vector<uint64_t> x1(x.comps[1].row(i), x.comps[1].row(i) + n);
        std::vector<uint64_t> y0(y.comps[0].row(i), y.comps[0].row(i) + n);
        std::vector<uint64_t> y1(y.comps[1].row(i), y.comps[1].row(i) + n);
        ntt_forward(t, x0.data());
        ntt_forward(t, x1.data());
        ntt_forward(t, y0.data());
        ntt_forward(t, y1.data());
        uint64_t* d0 = out.comps[0].row(i);
        uint64_t* d1 = out.comps[1].row(i);
        uint64_t* d2 = out.comps[2].row(i);
        for (std::size_t k = 0; k < n; ++k) {
            d0[k] = mul_mod(x0[k], y0[k], q);
            d1[k] = add_mod(mul_mod(x0[k], y1[k], q), mul_mod(x1[k], y0[k], q), q);
            d2[k] = mul_mod(x1[k], y1[k], q);
        }
        ntt_inverse(t, d0);
        ntt_inverse(t, d1);
        ntt_inverse(t, d2);
    }
    return out;
}

// Key switching of the degree-2 component back to degree 1 using the special
// prime. Per-prime digits keep the decomposition exact; the final division
// by the special prime is the rounded exact quotient.
inline Ciphertext relinearize(const Ciphertext& ct, const RelinKey& rk) {
    if (ct.size() != 3)
        fault(FaultCode::bad_state, "relinearize: expected three components");
    const CkksContext& ctx = *ct.ctx;
    const std::size_t active = ctx.active_count(ct.level);
    const std::size_t n = ctx.n();
    const uint64_t p = ctx.special_prime();
    if (rk.a.size() < active) fault(FaultCode::bad_state, "relinearize: relin key too short for level");

    // Accumulators in NTT domain over active data primes + special prime.
    std::vector<std::vector<uint64_t>> acc0(active + 1, std::vector<uint64_t>(n, 0));
    std::vector<std::vector<uint64_t>> acc1(active + 1, std::vector<uint64_t>(n, 0));
    auto modulus_at = [&](std::size_t m) { return m < active ? ctx.data_primes()[m] : p; };
    auto tables_at = [&](std::size_t m) -> const NttTables& {
        return m < active ? ctx.ntt_data(m) : ctx.ntt_special();
    };

    for (std::size_t i = 0; i < active; ++i) {
        const uint64_t* digit = ct.comps[2].row(i); // coefficients in [0, q_i)
        for (std::size_t m = 0; m <= active; ++m) {
            const uint64_t qm = modulus_at(m);
            std::vector<uint64_t> lifted(n);
            for (std::size_t k = 0; k < n; ++k) lifted[k] = digit[k] % qm;
            ntt_forward(tables_at(m), lifted.data());
            // relin key rows are stored over all moduli: data rows first, special last
            const std::size_t key_row = m < active ? m : ctx.data_primes().size();
            const uint64_t* kb = rk.b[i].row(key_row);
            const uint64_t* ka = rk.a[i].row(key_row);
            uint64_t* o0 = acc0[m].data();
            uint64_t* o1 = acc1[m].data();
            for (std::size_t k = 0; k < n; ++k) {
                o0[k] = add_mod(o0[k], mul_mod(lifted[k], kb[k], qm), qm);
                o1[k] = add_mod(o1[k], mul_mod(lifted[k], ka[k], qm), qm);
            }
        }
    }
    for (std::size_t m = 0; m <= active; ++m) {
        ntt_inverse(tables_at(m), acc0[m].data());
        ntt_inverse(tables_at(m), acc1[m].data());
    }

    Ciphertext out;
    out.ctx = ct.ctx;
    out.level = ct.level;
    out.scale = ct.scale;
    out.comps.assign(2, RnsPoly(active, n));
    const uint64_t half_p = p >> 1;
    for (std::size_t i = 0; i < active; ++i) {
        const uint64_t q = ctx.data_primes()[i];
        const uint64_t p_inv = inv_mod(p % q, q);
        uint64_t* o0 = out.comps[0].row(i);
        uint64_t* o1 = out.comps[1].row(i);
        const uint64_t* sp0 = acc0[active].data();
        const uint64_t* sp1 = acc1[active].data();
        for (std::size_t k = 0; k < n; ++k) {
            // centered remainder mod p, reduced into q
            const uint64_t r0 = sp0[k] <= half_p ? sp0[k] % q : sub_mod(0, (p - sp0[k]) % q, q);
            const uint64_t r1 = sp1[k] <= half_p ? sp1[k] % q : sub_mod(0, (p - sp1[k]) % q, q);
            o0[k] = add_mod(ct.comps[0].row(i)[k], mul_mod(sub_mod(acc0[i][k], r0, q), p_inv, q), q);
            o1[k] = add_mod(ct.comps[1].row(i)[k], mul_mod(sub_mod(acc1[i][k], r1, q), p_inv, q), q);
        }
    }
    return out;
}

// Drop the last active prime and divide the ciphertext by it (rounded exact
// quotient). Tracked scale becomes scale / q_drop; level goes one deeper.
inline Ciphertext rescale(const Ciphertext& ct) {
    const CkksContext& ctx = *ct.ctx;
    const std::size_t active = ctx.active_count(ct.level);
    if (active < 2)
        fault(FaultCode::bad_state, "rescale: modulus chain exhausted");
    const std::size_t drop = active - 1;
    const uint64_t q_drop = ctx.data_primes()[drop];
    const double new_scale = ct.scale / static_cast<double>(q_drop);
    if (new_scale < 2.0)
        fault(FaultCode::overflow, "rescale: scale underflow, multiply before rescaling again");
    const std::size_t n = ctx.n();
    const uint64_t half = q_drop >> 1;

    Ciphertext out;
    out.ctx = ct.ctx;
    out.level = ct.level + 1;
    out.scale = new_scale;
    out.comps.assign(ct.comps.size(), RnsPoly(drop, n));
    for (std::size_t c = 0; c < ct.comps.size(); ++c) {
        const uint64_t* last = ct.comps[c].row(drop);
        for (std::size_t i = 0; i < drop; ++i) {
            const uint64_t q = ctx.data_primes()[i];
            const uint64_t q_drop_inv = inv_mod(q_drop % q, q);
            uint64_t* o = out.comps[c].row(i);
            const uint64_t* src = ct.comps[c].row(i);
            for (std::size_t k = 0; k < n; ++k) {
                const uint64_t r = last[k] <= half ? last[k] % q : sub_mod(0, (q_drop - last[k]) % q, q);
                o[k] = mul_mod(sub_mod(src[k], r, q), q_drop_inv, q);
            }
        }
    }
    return out;
}

// Drop primes without dividing: value and scale preserved, level deepens.
inline Ciphertext mod_switch_to(const Ciphertext& ct, std::size_t target_level) {
    const CkksContext& ctx = *ct.ctx;
    if (target_level < ct.level)
        fault(FaultCode::bad_state, "mod_switch_to: cannot switch upward");
    if (target_level > ctx.max_level())
        fault(FaultCode::bad_state, "mod_switch_to: level beyond chain");
    Ciphertext out = ct;
    out.level = target_level;
    const std::size_t keep = ctx.active_count(target_level);
    for (auto& comp : out.comps)
        comp.w.resize(keep * ctx.n());
    return out;
}

} // namespace eqrl

#endif
