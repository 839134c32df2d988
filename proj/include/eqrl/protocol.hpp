#ifndef EQRL_PROTOCOL_HPP
#define EQRL_PROTOCOL_HPP

#include <cstdint>
#include <vector>

#include "eqrl/circuit.hpp"
#include "eqrl/ckks_serialize.hpp"
#include "eqrl/wire.hpp"

namespace eqrl {

// Payload codecs shared by the client and the cloud. Batch requests carry the
// five operand ciphertexts as length-prefixed blobs in fixed order (Q, r, Q',
// alpha, gamma); responses carry the result blob plus the cloud's per-type
// operation counts and timings for that batch.

inline constexpr std::size_t kBatchOperandCount = 5;

inline std::vector<uint8_t> encode_batch_request(const EncryptedBatch& batch) {
    const Ciphertext* operands[kBatchOperandCount] = {&batch.q, &batch.r, &batch.q_next, &batch.alpha,
                                                      &batch.gamma};
    std::vector<uint8_t> out;
    out.push_back(static_cast<uint8_t>(kBatchOperandCount));
    for (const Ciphertext* ct : operands) {
        const std::vector<uint8_t> blob = serialize_ciphertext(*ct);
        wire_detail::put_u32(out, static_cast<uint32_t>(blob.size()));
        out.insert(out.end(), blob.begin(), blob.end());
    }
    return out;
}

inline EncryptedBatch decode_batch_request(const ContextPtr& ctx, const std::vector<uint8_t>& payload) {
    wire_detail::Cursor c{payload};
    if (c.u8("operand count") != kBatchOperandCount)
        fault(FaultCode::malformed, "batch request: expected five operand ciphertexts");
    EncryptedBatch b;
    Ciphertext* operands[kBatchOperandCount] = {&b.q, &b.r, &b.q_next, &b.alpha, &b.gamma};
    for (Ciphertext* ct : operands) *ct = deserialize_ciphertext(ctx, c.blob("operand ciphertext"));
    c.expect_end();
    return b;
}

inline std::vector<uint8_t> encode_batch_response(const Ciphertext& result, const OpCounter& ops) {
    std::vector<uint8_t> out;
    const std::vector<uint8_t> blob = serialize_ciphertext(result);
    wire_detail::put_u32(out, static_cast<uint32_t>(blob.size()));
    out.insert(out.end(), blob.begin(), blob.end());
    for (std::size_t i = 0; i < kOpTypeCount; ++i) {
        wire_detail::put_u64(out, ops.count[i]);
        wire_detail::put_f64(out, ops.ms[i]);
    }
    return out;
}

struct BatchResponse {
    Ciphertext result;
    OpCounter ops;
};

inline BatchResponse decode_batch_response(const ContextPtr& ctx, const std::vector<uint8_t>& payload) {
    wire_detail::Cursor c{payload};
    BatchResponse r;
    r.result = deserialize_ciphertext(ctx, c.blob("result ciphertext"));
    for (std::size_t i = 0; i < kOpTypeCount; ++i) {
        r.ops.count[i] = c.u64("op count");
        r.ops.ms[i] = c.f64("op time");
        if (!(r.ops.ms[i] >= 0.0)) fault(FaultCode::malformed, "batch response: negative op time");
    }
    c.expect_end();
    return r;
}

} // namespace eqrl

#endif
