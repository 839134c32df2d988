#ifndef EQRL_CKKS_SERIALIZE_HPP
#define EQRL_CKKS_SERIALIZE_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "eqrl/ckks.hpp"
#include "eqrl/fault.hpp"

namespace eqrl {

// Byte layouts (all integers little endian):
//
// ciphertext: "EQRL" | version u16 | params_hash u64 | comps u8 | level u8 |
//             scale f64 | comps * active_primes * N coefficient words u64
// relin key:  "EQRK" | version u16 | params_hash u64 | digits u8 |
//             per digit: b rows then a rows over all moduli, N words each
//
// Coefficient words are the coefficient-domain residues for ciphertexts and
// the NTT-domain residues for relin keys (keys live in NTT form). A decoded
// blob is only accepted when its params hash matches the local context.

inline constexpr uint16_t kWireVersion = 1;
inline constexpr std::size_t kCiphertextHeaderBytes = 24;

namespace detail {

struct ByteWriter {
    std::vector<uint8_t> out;

    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const char* p, std::size_t len) {
        out.insert(out.end(), p, p + len);
    }
};

struct ByteReader {
    const uint8_t* p;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > len) fault(FaultCode::malformed, std::string("truncated blob while reading ") + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return p[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(p[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos++]) << (8 * i);
        return v;
    }
    double f64(const char* what) {
        const uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void expect_magic(const char* magic) {
        need(4, "magic");
        if (std::memcmp(p + pos, magic, 4) != 0)
            fault(FaultCode::malformed, std::string("bad magic, expected ") + magic);
        pos += 4;
    }
    void expect_end() {
        if (pos != len) fault(FaultCode::malformed, "trailing bytes after blob");
    }
};

} // namespace detail

inline std::vector<uint8_t> serialize_ciphertext(const Ciphertext& ct) {
    if (!ct.ctx || ct.comps.empty()) fault(FaultCode::bad_argument, "serialize: empty ciphertext");
    detail::ByteWriter w;
    w.bytes("EQRL", 4);
    w.u16(kWireVersion);
    w.u64(ct.ctx->params_hash());
    w.u8(static_cast<uint8_t>(ct.comps.size()));
    w.u8(static_cast<uint8_t>(ct.level));
    w.f64(ct.scale);
    for (const RnsPoly& comp : ct.comps)
        for (uint64_t word : comp.w) w.u64(word);
    return std::move(w.out);
}

inline Ciphertext deserialize_ciphertext(const ContextPtr& ctx, const std::vector<uint8_t>& blob) {
    detail::ByteReader r{blob.data(), blob.size()};
    r.expect_magic("EQRL");
    if (r.u16("version") != kWireVersion) fault(FaultCode::malformed, "unsupported wire version");
    if (r.u64("params hash") != ctx->params_hash())
        fault(FaultCode::params_mismatch, "ciphertext was produced under different parameters");
    const std::size_t comps = r.u8("component count");
    const std::size_t level = r.u8("level");
    const double scale = r.f64("scale");
    if (comps < 1 || comps > 3) fault(FaultCode::malformed, "component count out of range");
    if (level > ctx->max_level()) fault(FaultCode::malformed, "level beyond modulus chain");
    if (!(scale > 1.0) || !std::isfinite(scale)) fault(FaultCode::malformed, "scale out of range");

    const std::size_t active = ctx->active_count(level);
    const std::size_t n = ctx->n();
    Ciphertext ct;
    ct.ctx = ctx;
    ct.level = level;
    ct.scale = scale;
    ct.comps.assign(comps, RnsPoly(active, n));
    for (std::size_t c = 0; c < comps; ++c) {
        RnsPoly& comp = ct.comps[c];
        for (std::size_t i = 0; i < active; ++i) {
            const uint64_t q = ctx->data_primes()[i];
            uint64_t* row = comp.row(i);
            for (std::size_t k = 0; k < n; ++k) {
                row[k] = r.u64("coefficient");
                if (row[k] >= q) fault(FaultCode::malformed, "coefficient out of modulus range");
            }
        }
    }
    r.expect_end();
    return ct;
}

inline std::vector<uint8_t> serialize_relin_key(const ContextPtr& ctx, const RelinKey& rk) {
    if (rk.a.empty() || rk.a.size() != rk.b.size())
        fault(FaultCode::bad_argument, "serialize: malformed relin key");
    detail::ByteWriter w;
    w.bytes("EQRK", 4);
    w.u16(kWireVersion);
    w.u64(ctx->params_hash());
    w.u8(static_cast<uint8_t>(rk.a.size()));
    for (std::size_t i = 0; i < rk.a.size(); ++i) {
        for (uint64_t word : rk.b[i].w) w.u64(word);
        for (uint64_t word : rk.a[i].w) w.u64(word);
    }
    return std::move(w.out);
}

inline RelinKey deserialize_relin_key(const ContextPtr& ctx, const std::vector<uint8_t>& blob) {
    detail::ByteReader r{blob.data(), blob.size()};
    r.expect_magic("EQRK");
    if (r.u16("version") != kWireVersion) fault(FaultCode::malformed, "unsupported wire version");
    if (r.u64("params hash") != ctx->params_hash())
        fault(FaultCode::params_mismatch, "relin key was produced under different parameters");
    const std::size_t digits = r.u8("digit count");
    if (digits != ctx->data_primes().size()) fault(FaultCode::malformed, "digit count does not match chain");

    const std::size_t rows = ctx->all_moduli().size();
    const std::size_t n = ctx->n();
    RelinKey rk;
    rk.b.assign(digits, RnsPoly(rows, n));
    rk.a.assign(digits, RnsPoly(rows, n));
    for (std::size_t i = 0; i < digits; ++i) {
        for (RnsPoly* poly : {&rk.b[i], &rk.a[i]}) {
            for (std::size_t m = 0; m < rows; ++m) {
                const uint64_t q = ctx->all_moduli()[m];
                uint64_t* row = poly->row(m);
                for (std::size_t k = 0; k < n; ++k) {
                    row[k] = r.u64("key coefficient");
                    if (row[k] >= q) fault(FaultCode::malformed, "key coefficient out of modulus range");
                }
            }
        }
    }
    r.expect_end();
    return rk;
}

} // namespace eqrl

#endif
