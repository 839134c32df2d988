#ifndef EQRL_CIRCUIT_HPP
#define EQRL_CIRCUIT_HPP

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eqrl/ckks.hpp"
#include "eqrl/fault.hpp"
#include "eqrl/learner.hpp"
#include "eqrl/rng.hpp"

namespace eqrl {

// ============================================================================
// Operation accounting
// ============================================================================

enum class OpType : int {
    encode = 0,
    encrypt,
    multiply,
    relinearize,
    rescale,
    addition,
    decrypt,
    decode,
};

inline constexpr std::size_t kOpTypeCount = 8;

inline const char* op_name(OpType t) {
    static constexpr const char* names[kOpTypeCount] = {
        "Encode", "Encrypt", "Multiply", "Relinearize", "Rescale", "Addition", "Decrypt", "Decode"};
    return names[static_cast<std::size_t>(t)];
}

struct OpCounter {
    std::array<uint64_t, kOpTypeCount> count{};
    std::array<double, kOpTypeCount> ms{};

    void add(OpType t, double elapsed_ms) {
        ++count[static_cast<std::size_t>(t)];
        ms[static_cast<std::size_t>(t)] += elapsed_ms;
    }

    OpCounter& operator+=(const OpCounter& o) {
        for (std::size_t i = 0; i < kOpTypeCount; ++i) {
            count[i] += o.count[i];
            ms[i] += o.ms[i];
        }
        return *this;
    }

    uint64_t total_count() const {
        uint64_t s = 0;
        for (uint64_t c : count) s += c;
        return s;
    }
    double total_ms() const {
        double s = 0.0;
        for (double v : ms) s += v;
        return s;
    }
};

namespace detail {

template <class F>
auto timed_op(OpCounter& ops, OpType t, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    const auto t1 = std::chrono::steady_clock::now();
    ops.add(t, std::chrono::duration<double, std::milli>(t1 - t0).count());
    return result;
}

} // namespace detail

// Per-type rows averaged over `batches`, then a Total row. Percent is each
// type's share of accumulated wall time.
inline void write_op_report(std::ostream& out, const OpCounter& ops, uint64_t batches = 1) {
    if (batches < 1) fault(FaultCode::bad_argument, "op report: batch divisor must be at least 1");
    const double total = ops.total_ms();
    out << "Type\tNum\tTime (ms)\tPercent\n";
    char line[160];
    for (std::size_t i = 0; i < kOpTypeCount; ++i) {
        const double num = static_cast<double>(ops.count[i]) / static_cast<double>(batches);
        const double time = ops.ms[i] / static_cast<double>(batches);
        const double pct = total > 0.0 ? 100.0 * ops.ms[i] / total : 0.0;
        std::snprintf(line, sizeof line, "%s\t%.6g\t%.3f\t%.2f\n", op_name(static_cast<OpType>(i)), num, time,
                      pct);
        out << line;
    }
    std::snprintf(line, sizeof line, "Total\t%.6g\t%.3f\t%.2f\n",
                  static_cast<double>(ops.total_count()) / static_cast<double>(batches),
                  total / static_cast<double>(batches), total > 0.0 ? 100.0 : 0.0);
    out << line;
}

// ============================================================================
// Packing
// ============================================================================

// Slot vectors for one batch of updates. `origin` is client-side routing
// metadata and never leaves the client.
struct PackedBatch {
    std::vector<double> q;      // Q(s,a) at collection time
    std::vector<double> r;      // rewards
    std::vector<double> q_next; // Q(s',a'), zero on terminal records
    std::vector<double> alpha;  // per-slot step sizes
    std::vector<double> gamma;  // per-slot discounts
    std::vector<std::pair<int, int>> origin;

    std::size_t size() const { return q.size(); }

    void validate(std::size_t slot_count) const {
        const std::size_t L = q.size();
        if (L < 1) fault(FaultCode::bad_argument, "batch: empty");
        if (L > slot_count) fault(FaultCode::bad_argument, "batch: more records than ciphertext slots");
        if (r.size() != L || q_next.size() != L || alpha.size() != L || gamma.size() != L)
            fault(FaultCode::bad_argument, "batch: slot vectors have different lengths");
        for (const auto& vec : {&q, &r, &q_next, &alpha, &gamma})
            for (double v : *vec)
                if (!std::isfinite(v)) fault(FaultCode::bad_argument, "batch: non-finite slot value");
    }
};

inline PackedBatch pack_records(std::span<const TransitionRecord> records) {
    PackedBatch b;
    b.q.reserve(records.size());
    b.r.reserve(records.size());
    b.q_next.reserve(records.size());
    b.alpha.reserve(records.size());
    b.gamma.reserve(records.size());
    b.origin.reserve(records.size());
    for (const TransitionRecord& z : records) {
        z.validate();
        b.q.push_back(z.q_sa);
        b.r.push_back(z.reward);
        b.q_next.push_back(z.terminal ? 0.0 : z.q_next);
        b.alpha.push_back(z.alpha);
        b.gamma.push_back(z.gamma);
        b.origin.emplace_back(z.s, z.a);
    }
    return b;
}

// The five operand ciphertexts, in wire order.
struct EncryptedBatch {
    Ciphertext q, r, q_next, alpha, gamma;
};

namespace detail {

// Operand scales are chosen so that every rescale in the update circuit
// cancels its multiplier scale exactly: alpha carries the prime the first
// rescale divides by, q_next the prime the second divides by, and the
// remaining operands the nominal scale. All additions then meet at exactly
// the nominal scale and the output scale is the nominal scale again.
inline double scale_for_alpha(const CkksContext& ctx) {
    return static_cast<double>(ctx.data_primes().back());
}
inline double scale_for_q_next(const CkksContext& ctx) {
    return static_cast<double>(ctx.data_primes()[ctx.data_primes().size() - 2]);
}

inline void require_operand(const Ciphertext& ct, double expected_scale, const char* name) {
    if (ct.size() != 2) fault(FaultCode::bad_state, std::string("operand ") + name + ": expected two components");
    if (ct.level != 0) fault(FaultCode::bad_state, std::string("operand ") + name + ": expected a fresh ciphertext");
    const double ratio = ct.scale / expected_scale;
    if (!(std::fabs(std::log2(ratio)) <= 0x1p-10))
        fault(FaultCode::bad_state, std::string("operand ") + name + ": scale misaligned with the update circuit");
}

} // namespace detail

inline EncryptedBatch pack_and_encrypt(const KeySet& keys, const PackedBatch& batch, Rng& rng, OpCounter& ops) {
    const CkksContext& ctx = *keys.ctx;
    batch.validate(ctx.slot_count());
    const double delta = ctx.params().scale;

    auto one = [&](const std::vector<double>& values, double scale) {
        const Plaintext pt =
            detail::timed_op(ops, OpType::encode, [&] { return encode(keys.ctx, values, scale); });
        return detail::timed_op(ops, OpType::encrypt, [&] { return encrypt(keys, pt, rng); });
    };

    EncryptedBatch out;
    out.q = one(batch.q, delta);
    out.r = one(batch.r, delta);
    out.q_next = one(batch.q_next, detail::scale_for_q_next(ctx));
    out.alpha = one(batch.alpha, detail::scale_for_alpha(ctx));
    out.gamma = one(batch.gamma, delta);
    return out;
}

// Slotwise (1-alpha)*Q + alpha*(r + gamma*Q') as four products and three
// additions:
//   m1 = alpha*gamma          m2 = m1*Q'
//   m3 = alpha*r              m4 = alpha*Q
//   out = ((Q - m4) + m3) + m2
// Every product is relinearized and rescaled; Q and Q' ride down the chain
// via mod switches. Output sits two levels deep at the nominal scale.
inline Ciphertext evaluate_update(const EncryptedBatch& in, const RelinKey& rk, OpCounter& ops) {
    if (!in.q.ctx) fault(FaultCode::bad_argument, "operand q: missing context");
    const CkksContext& ctx = *in.q.ctx;
    if (ctx.max_level() < 2) fault(FaultCode::bad_state, "modulus chain too short for the update circuit");
    const double delta = ctx.params().scale;
    detail::require_operand(in.q, delta, "q");
    detail::require_operand(in.r, delta, "r");
    detail::require_operand(in.q_next, detail::scale_for_q_next(ctx), "q_next");
    detail::require_operand(in.alpha, detail::scale_for_alpha(ctx), "alpha");
    detail::require_operand(in.gamma, delta, "gamma");

    auto product = [&](const Ciphertext& x, const Ciphertext& y) {
        Ciphertext p = detail::timed_op(ops, OpType::multiply, [&] { return he_mul(x, y); });
        p = detail::timed_op(ops, OpType::relinearize, [&] { return relinearize(p, rk); });
        return detail::timed_op(ops, OpType::rescale, [&] { return rescale(p); });
    };
    auto sum = [&](const Ciphertext& x, const Ciphertext& y) {
        return detail::timed_op(ops, OpType::addition, [&] { return he_add(x, y); });
    };

    const Ciphertext m1 = product(in.alpha, in.gamma);
    const Ciphertext m2 = product(m1, mod_switch_to(in.q_next, 1));
    const Ciphertext m3 = product(in.alpha, in.r);
    const Ciphertext m4 = product(in.alpha, in.q);

    Ciphertext acc = detail::timed_op(ops, OpType::addition,
                                      [&] { return he_sub(mod_switch_to(in.q, 1), m4); });
    acc = sum(acc, m3);
    acc = sum(mod_switch_to(acc, 2), m2);
    return acc;
}

inline std::vector<double> decrypt_and_unpack(const KeySet& keys, const Ciphertext& ct, std::size_t batch_size,
                                              OpCounter& ops) {
    const CkksContext& ctx = *keys.ctx;
    if (batch_size < 1 || batch_size > ctx.slot_count())
        fault(FaultCode::bad_argument, "unpack: batch size outside slot range");
    const Plaintext pt = detail::timed_op(ops, OpType::decrypt, [&] { return decrypt(keys, ct); });
    std::vector<double> slots = detail::timed_op(ops, OpType::decode, [&] { return decode(pt); });
    slots.resize(batch_size);
    return slots;
}

// ============================================================================
// Precision measurement
// ============================================================================

struct PrecisionReport {
    uint64_t batches = 0;
    std::size_t batch_size = 0;
    // worst over batches of max_i |enc_i - plain_i| / max(|plain|_inf, |Q|_inf, |Q'|_inf, 1e-6)
    double max_batch_relative = 0.0;
    // worst single-slot |enc_i - plain_i| / max(|plain_i|, 1e-6); unbounded in
    // principle near cancellation slots, reported for transparency
    double max_slot_relative = 0.0;
    double max_absolute = 0.0;
    OpCounter ops;
};

// Full pack -> evaluate -> unpack cycles on randomized batches drawn from the
// realistic operating box: Q, Q' in [-100,100], r in [-1,1], alpha in (0,1],
// gamma in [0,1).
inline PrecisionReport measure_precision(const KeySet& keys, uint64_t batches, std::size_t batch_size,
                                         Rng& rng) {
    if (batches < 1) fault(FaultCode::bad_argument, "measure_precision: need at least one batch");
    PrecisionReport rep;
    rep.batches = batches;
    rep.batch_size = batch_size;

    for (uint64_t b = 0; b < batches; ++b) {
        PackedBatch batch;
        batch.q.resize(batch_size);
        batch.r.resize(batch_size);
        batch.q_next.resize(batch_size);
        batch.alpha.resize(batch_size);
        batch.gamma.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            batch.q[i] = -100.0 + 200.0 * rng.next_double();
            batch.q_next[i] = -100.0 + 200.0 * rng.next_double();
            batch.r[i] = -1.0 + 2.0 * rng.next_double();
            batch.alpha[i] = 1.0 - rng.next_double() * (1.0 - 1e-6);
            batch.gamma[i] = rng.next_double();
        }

        const EncryptedBatch enc = pack_and_encrypt(keys, batch, rng, rep.ops);
        const Ciphertext result = evaluate_update(enc, keys.relin, rep.ops);
        const std::vector<double> got = decrypt_and_unpack(keys, result, batch_size, rep.ops);

        double plain_inf = 0.0, q_inf = 0.0;
        for (std::size_t i = 0; i < batch_size; ++i) {
            q_inf = std::max({q_inf, std::fabs(batch.q[i]), std::fabs(batch.q_next[i])});
            plain_inf = std::max(plain_inf,
                                 std::fabs(sarsa_update(batch.q[i], batch.r[i], batch.q_next[i],
                                                        batch.alpha[i], batch.gamma[i])));
        }
        const double norm = std::max({plain_inf, q_inf, 1e-6});
        for (std::size_t i = 0; i < batch_size; ++i) {
            const double plain =
                sarsa_update(batch.q[i], batch.r[i], batch.q_next[i], batch.alpha[i], batch.gamma[i]);
            const double err = std::fabs(got[i] - plain);
            rep.max_absolute = std::max(rep.max_absolute, err);
            rep.max_batch_relative = std::max(rep.max_batch_relative, err / norm);
            rep.max_slot_relative = std::max(rep.max_slot_relative, err / std::max(std::fabs(plain), 1e-6));
        }
    }
    return rep;
}

} // namespace eqrl

#endif
