#ifndef EQRL_CLOUD_HPP
#define EQRL_CLOUD_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "eqrl/protocol.hpp"

namespace eqrl {

// What one connection has negotiated and served so far.
struct SessionState {
    bool params_negotiated = false;
    bool relin_key_present = false;
    uint64_t batches_served = 0;
    OpCounter ops;
};

// Evaluation service. It holds public parameters and, per connection, the
// uploaded relinearization key; it never sees secret keys, plaintexts, or
// origin metadata. Faults are answered with a Fault frame and the connection
// keeps serving.
class CloudService {
public:
    explicit CloudService(ContextPtr ctx, bool capture_traffic = false)
        : ctx_(std::move(ctx)), capture_(capture_traffic) {
        if (!ctx_) fault(FaultCode::bad_argument, "cloud: missing context");
    }

    // Serves one connection until Bye or end of stream. Transport failures
    // propagate as io faults; protocol failures stay on the wire.
    SessionState serve_connection(ByteStream& stream) {
        SessionState state;
        std::optional<RelinKey> relin;
        for (;;) {
            std::optional<Frame> frame;
            try {
                frame = read_frame(stream);
            } catch (const Fault& f) {
                // a stream that cannot even be framed has no usable
                // continuation; answer once and hang up
                if (f.code() == FaultCode::malformed) {
                    send_fault(stream, WireFault::malformed, f.what());
                    return state;
                }
                throw;
            }
            if (!frame) break;
            capture(frame->payload);

            switch (frame->type) {
                case MsgType::hello: {
                    if (!handle_hello(stream, *frame, state)) continue;
                    break;
                }
                case MsgType::relin_key_upload: {
                    try {
                        relin = deserialize_relin_key(ctx_, frame->payload);
                        state.relin_key_present = true;
                        send_frame(stream, MsgType::hello_ack, encode_hello(kWireVersion, ctx_->params_hash()));
                    } catch (const Fault& f) {
                        send_fault(stream, classify_parse_fault(f), f.what());
                    }
                    break;
                }
                case MsgType::batch_request: {
                    if (!relin) {
                        send_fault(stream, WireFault::missing_relin_key,
                                   "upload the relinearization key before requesting batches");
                        break;
                    }
                    handle_batch(stream, *frame, *relin, state);
                    break;
                }
                case MsgType::bye:
                    return state;
                default:
                    send_fault(stream, WireFault::malformed, "unknown message type");
            }
        }
        return state;
    }

    // Accept loop for a TCP endpoint: one worker thread per connection.
    // Returns after `max_connections` have been served, or when the listener
    // is closed (0 = run until then).
    void serve(TcpListener& listener, uint64_t max_connections = 0) {
        std::vector<std::thread> workers;
        for (uint64_t served = 0; max_connections == 0 || served < max_connections; ++served) {
            StreamPtr conn;
            try {
                conn = listener.accept();
            } catch (const Fault&) {
                break; // listener closed, drain the workers
            }
            workers.emplace_back([this, conn] {
                try {
                    serve_connection(*conn);
                } catch (const Fault&) {
                    // connection died; nothing to report to
                }
            });
        }
        for (std::thread& w : workers) w.join();
    }

    const ContextPtr& ctx() const { return ctx_; }

    // Every payload byte this service has received, for confidentiality
    // scans in tests. Empty unless capture was enabled.
    std::vector<uint8_t> captured_bytes() const {
        std::lock_guard<std::mutex> lock(capture_mutex_);
        return captured_;
    }

    uint64_t total_batches_served() const { return total_batches_.load(); }

private:
    bool handle_hello(ByteStream& stream, const Frame& frame, SessionState& state) {
        HelloPayload hello;
        try {
            hello = decode_hello(frame.payload);
        } catch (const Fault& f) {
            send_fault(stream, WireFault::malformed, f.what());
            return false;
        }
        if (hello.version != kWireVersion) {
            send_fault(stream, WireFault::params_mismatch, "unsupported protocol version");
            return false;
        }
        if (hello.params_hash != ctx_->params_hash()) {
            send_fault(stream, WireFault::params_mismatch, "parameter sets differ");
            return false;
        }
        state.params_negotiated = true;
        send_frame(stream, MsgType::hello_ack, encode_hello(kWireVersion, ctx_->params_hash()));
        return true;
    }

    void handle_batch(ByteStream& stream, const Frame& frame, const RelinKey& relin, SessionState& state) {
        EncryptedBatch batch;
        try {
            batch = decode_batch_request(ctx_, frame.payload);
        } catch (const Fault& f) {
            send_fault(stream, classify_parse_fault(f), f.what());
            return;
        }
        OpCounter delta;
        Ciphertext result;
        try {
            result = evaluate_update(batch, relin, delta);
        } catch (const Fault& f) {
            send_fault(stream, WireFault::evaluation, f.what());
            return;
        }
        state.ops += delta;
        ++state.batches_served;
        ++total_batches_;
        send_frame(stream, MsgType::batch_response, encode_batch_response(result, delta));
    }

    static WireFault classify_parse_fault(const Fault& f) {
        return f.code() == FaultCode::params_mismatch ? WireFault::params_mismatch : WireFault::malformed;
    }

    void send_frame(ByteStream& stream, MsgType type, const std::vector<uint8_t>& payload) {
        write_frame(stream, type, payload);
    }

    void send_fault(ByteStream& stream, WireFault code, const std::string& text) {
        write_frame(stream, MsgType::fault_frame, encode_fault(code, text));
    }

    void capture(const std::vector<uint8_t>& payload) {
        if (!capture_) return;
        std::lock_guard<std::mutex> lock(capture_mutex_);
        captured_.insert(captured_.end(), payload.begin(), payload.end());
    }

    ContextPtr ctx_;
    bool capture_;
    mutable std::mutex capture_mutex_;
    std::vector<uint8_t> captured_;
    std::atomic<uint64_t> total_batches_{0};
};

} // namespace eqrl

#endif
