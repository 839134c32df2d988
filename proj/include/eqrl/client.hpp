#ifndef EQRL_CLIENT_HPP
#define EQRL_CLIENT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eqrl/learner.hpp"
#include "eqrl/protocol.hpp"

namespace eqrl {

// Client end of an evaluation session. Owns every key; the stream carries
// nothing but ciphertexts, parameter hashes, and fault frames.
class ClientSession {
public:
    ClientSession(StreamPtr stream, KeySet keys, uint64_t rng_seed)
        : stream_(std::move(stream)), keys_(std::move(keys)), rng_(Rng(rng_seed).split("client-enc")) {
        if (!stream_) fault(FaultCode::bad_argument, "client: missing stream");
        if (!keys_.ctx) fault(FaultCode::bad_argument, "client: missing keys");
        handshake();
    }

    // Ships the relinearization key; the only key material that ever leaves.
    void upload_relin_key() {
        write_frame(*stream_, MsgType::relin_key_upload, serialize_relin_key(keys_.ctx, keys_.relin));
        expect_ack("relin key upload");
        relin_uploaded_ = true;
    }

    // One remote circuit evaluation; the response counter is folded into the
    // cloud-side tally.
    Ciphertext evaluate_remote(const EncryptedBatch& batch) {
        write_frame(*stream_, MsgType::batch_request, encode_batch_request(batch));
        const Frame frame = await_frame("batch response");
        if (frame.type == MsgType::fault_frame) throw_wire_fault(frame);
        if (frame.type != MsgType::batch_response)
            fault(FaultCode::malformed, "client: unexpected reply to batch request");
        BatchResponse resp = decode_batch_response(keys_.ctx, frame.payload);
        cloud_ops_ += resp.ops;
        ++batches_sent_;
        return std::move(resp.result);
    }

    // pack -> send -> await -> unpack; results in record order.
    std::vector<double> upload_batch(std::span<const TransitionRecord> records) {
        if (records.empty()) fault(FaultCode::bad_argument, "client: empty batch, nothing to upload");
        const PackedBatch batch = pack_records(records);
        const EncryptedBatch enc = pack_and_encrypt(keys_, batch, rng_, client_ops_);
        const Ciphertext result = evaluate_remote(enc);
        return decrypt_and_unpack(keys_, result, batch.size(), client_ops_);
    }

    void bye() {
        if (!stream_) return;
        write_frame(*stream_, MsgType::bye, {});
        stream_->close();
        stream_.reset();
    }

    const KeySet& keys() const { return keys_; }
    Rng& rng() { return rng_; }
    bool relin_uploaded() const { return relin_uploaded_; }
    uint64_t batches_sent() const { return batches_sent_; }
    const OpCounter& client_ops() const { return client_ops_; }
    const OpCounter& cloud_ops() const { return cloud_ops_; }

private:
    void handshake() {
        write_frame(*stream_, MsgType::hello, encode_hello(kWireVersion, keys_.ctx->params_hash()));
        const Frame frame = await_frame("hello ack");
        if (frame.type == MsgType::fault_frame) throw_wire_fault(frame);
        if (frame.type != MsgType::hello_ack) fault(FaultCode::malformed, "client: unexpected reply to hello");
        const HelloPayload ack = decode_hello(frame.payload);
        if (ack.params_hash != keys_.ctx->params_hash())
            fault(FaultCode::params_mismatch, "client: service acknowledged different parameters");
    }

    void expect_ack(const char* what) {
        const Frame frame = await_frame(what);
        if (frame.type == MsgType::fault_frame) throw_wire_fault(frame);
        if (frame.type != MsgType::hello_ack)
            fault(FaultCode::malformed, std::string("client: unexpected reply to ") + what);
    }

    Frame await_frame(const char* what) {
        std::optional<Frame> frame = read_frame(*stream_);
        if (!frame) fault(FaultCode::io, std::string("client: connection closed awaiting ") + what);
        return std::move(*frame);
    }

    [[noreturn]] void throw_wire_fault(const Frame& frame) {
        const FaultPayload f = decode_fault(frame.payload);
        fault(to_fault_code(f.code), "cloud: " + f.text);
    }

    StreamPtr stream_;
    KeySet keys_;
    Rng rng_;
    bool relin_uploaded_ = false;
    uint64_t batches_sent_ = 0;
    OpCounter client_ops_;
    OpCounter cloud_ops_;
};

// ============================================================================
// Encrypted training loop
// ============================================================================

struct TrainingCurveRow {
    uint64_t batch = 0;
    uint64_t steps = 0;
    uint64_t episodes = 0;
    double mean_reward = 0.0;
    double max_abs_q = 0.0;
    double shadow_deviation = 0.0; // relative, this batch
};

struct EncryptedTrainingResult {
    QTable q;                      // the table trained through the service
    std::vector<double> shadow;    // plaintext-arithmetic twin of the values
    std::vector<TrainingCurveRow> curve;
    double max_shadow_deviation = 0.0;
    uint64_t batches = 0;
    uint64_t steps = 0;
    uint64_t episodes = 0;
    OpCounter client_ops;
    OpCounter cloud_ops;
};

// Collect L transitions, evaluate the update remotely, apply; repeat. A
// shadow copy of the Q values applies the plaintext formula to the identical
// records, so the deviation isolates encryption-induced error.
template <class Env>
EncryptedTrainingResult run_encrypted_training(Env env, const PolicyConfig& cfg, uint64_t batch_size,
                                               uint64_t batches, ClientSession& session,
                                               double initial_q = 0.0) {
    BatchSession<Env> learner(std::move(env), cfg);
    if (initial_q != 0.0)
        for (int s = 0; s < learner.q().num_states(); ++s)
            for (int a = 0; a < learner.q().num_actions(); ++a) learner.q().set_value(s, a, initial_q);
    EncryptedTrainingResult out;
    out.shadow.assign(static_cast<std::size_t>(learner.q().num_states()) *
                          static_cast<std::size_t>(learner.q().num_actions()),
                      initial_q);

    for (uint64_t b = 1; b <= batches; ++b) {
        const std::vector<TransitionRecord> records = learner.collect(batch_size);
        const std::vector<double> results = session.upload_batch(records);
        learner.apply(records, results);

        TrainingCurveRow row;
        row.batch = b;
        double reward_sum = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const TransitionRecord& z = records[i];
            reward_sum += z.reward;
            out.shadow[static_cast<std::size_t>(z.s * learner.q().num_actions() + z.a)] =
                sarsa_update(z.q_sa, z.reward, z.q_next, z.alpha, z.gamma);
        }
        row.steps = learner.steps_taken();
        row.episodes = learner.episodes();
        row.mean_reward = reward_sum / static_cast<double>(records.size());

        double live_inf = 0.0, dev = 0.0;
        const std::vector<double>& live = learner.q().values();
        for (std::size_t i = 0; i < live.size(); ++i) {
            live_inf = std::max(live_inf, std::fabs(out.shadow[i]));
            dev = std::max(dev, std::fabs(live[i] - out.shadow[i]));
        }
        row.max_abs_q = live_inf;
        row.shadow_deviation = dev / std::max(live_inf, 1e-6);
        out.max_shadow_deviation = std::max(out.max_shadow_deviation, row.shadow_deviation);
        out.curve.push_back(row);
    }

    out.q = learner.q();
    out.batches = batches;
    out.steps = learner.steps_taken();
    out.episodes = learner.episodes();
    out.client_ops = session.client_ops();
    out.cloud_ops = session.cloud_ops();
    return out;
}

} // namespace eqrl

#endif
