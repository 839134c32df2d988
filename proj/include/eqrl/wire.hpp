#ifndef EQRL_WIRE_HPP
#define EQRL_WIRE_HPP

#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include "eqrl/fault.hpp"

namespace eqrl {

// ============================================================================
// Byte streams
// ============================================================================

// Blocking, ordered, reliable byte transport. read_upto returns 0 only on a
// clean end of stream before any byte was delivered.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual void write_all(const uint8_t* data, std::size_t len) = 0;
    virtual std::size_t read_upto(uint8_t* data, std::size_t len) = 0;
    virtual void close() = 0;

    void read_exact(uint8_t* data, std::size_t len, const char* what) {
        std::size_t got = 0;
        while (got < len) {
            const std::size_t n = read_upto(data + got, len - got);
            if (n == 0)
                fault(FaultCode::io, std::string("connection closed while reading ") + what);
            got += n;
        }
    }
};

using StreamPtr = std::shared_ptr<ByteStream>;

namespace detail {

// One direction of an in-memory connection.
class Pipe {
public:
    void write(const uint8_t* data, std::size_t len) {
        std::lock_guard<std::mutex> lock(m_);
        if (closed_) fault(FaultCode::io, "pipe: write after close");
        buf_.insert(buf_.end(), data, data + len);
        cv_.notify_all();
    }

    std::size_t read_upto(uint8_t* data, std::size_t len) {
        std::unique_lock<std::mutex> lock(m_);
        cv_.wait(lock, [&] { return !buf_.empty() || closed_; });
        if (buf_.empty()) return 0;
        const std::size_t n = std::min(len, buf_.size());
        std::copy(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n), data);
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
        return n;
    }

    void close() {
        std::lock_guard<std::mutex> lock(m_);
        closed_ = true;
        cv_.notify_all();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::deque<uint8_t> buf_;
    bool closed_ = false;
};

} // namespace detail

class InMemoryStream : public ByteStream {
public:
    InMemoryStream(std::shared_ptr<detail::Pipe> out, std::shared_ptr<detail::Pipe> in)
        : out_(std::move(out)), in_(std::move(in)) {}
    ~InMemoryStream() override { close(); }

    void write_all(const uint8_t* data, std::size_t len) override { out_->write(data, len); }
    std::size_t read_upto(uint8_t* data, std::size_t len) override { return in_->read_upto(data, len); }
    void close() override {
        out_->close();
        in_->close();
    }

private:
    std::shared_ptr<detail::Pipe> out_, in_;
};

// Two connected endpoints sharing a pair of pipes.
inline std::pair<StreamPtr, StreamPtr> make_duplex_pair() {
    auto ab = std::make_shared<detail::Pipe>();
    auto ba = std::make_shared<detail::Pipe>();
    return {std::make_shared<InMemoryStream>(ab, ba), std::make_shared<InMemoryStream>(ba, ab)};
}

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {
        if (fd_ < 0) fault(FaultCode::io, "tcp: bad socket descriptor");
    }
    ~TcpStream() override { close(); }
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    void write_all(const uint8_t* data, std::size_t len) override {
        std::size_t sent = 0;
        while (sent < len) {
            const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
            if (n < 0) fault(FaultCode::io, "tcp: send failed");
            sent += static_cast<std::size_t>(n);
        }
    }

    std::size_t read_upto(uint8_t* data, std::size_t len) override {
        const ssize_t n = ::recv(fd_, data, len, 0);
        if (n < 0) fault(FaultCode::io, "tcp: recv failed");
        return static_cast<std::size_t>(n);
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_;
};

class TcpListener {
public:
    explicit TcpListener(uint16_t port = 0) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) fault(FaultCode::io, "tcp: cannot create listener socket");
        const int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd_);
            fault(FaultCode::io, "tcp: cannot bind loopback port");
        }
        if (::listen(fd_, 8) != 0) {
            ::close(fd_);
            fault(FaultCode::io, "tcp: listen failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }
    ~TcpListener() { close(); }
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    uint16_t port() const { return port_; }

    StreamPtr accept() {
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) fault(FaultCode::io, "tcp: accept failed");
        return std::make_shared<TcpStream>(fd);
    }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

inline StreamPtr tcp_connect(const std::string& host, uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fault(FaultCode::io, "tcp: cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        fault(FaultCode::bad_argument, "tcp: host must be a dotted IPv4 address");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        fault(FaultCode::io, "tcp: connect failed");
    }
    return std::make_shared<TcpStream>(fd);
}

// ============================================================================
// Framing
// ============================================================================

enum class MsgType : uint8_t {
    hello = 1,
    hello_ack = 2,
    relin_key_upload = 3,
    batch_request = 4,
    batch_response = 5,
    fault_frame = 6,
    bye = 7,
};

// Wire fault codes; numerically aligned with the first FaultCode values.
enum class WireFault : uint8_t {
    malformed = 1,
    params_mismatch = 2,
    missing_relin_key = 3,
    evaluation = 4,
    internal = 5,
};

struct Frame {
    MsgType type{};
    std::vector<uint8_t> payload;
};

inline constexpr std::size_t kMaxFramePayload = std::size_t{1} << 26; // 64 MiB

// frame = u32 payload length (LE) | u8 msg type | payload
inline void write_frame(ByteStream& stream, MsgType type, const std::vector<uint8_t>& payload) {
    if (payload.size() > kMaxFramePayload) fault(FaultCode::bad_argument, "frame: payload too large");
    uint8_t header[5];
    const uint32_t len = static_cast<uint32_t>(payload.size());
    std::memcpy(header, &len, 4);
    header[4] = static_cast<uint8_t>(type);
    stream.write_all(header, 5);
    if (!payload.empty()) stream.write_all(payload.data(), payload.size());
}

// nullopt on clean end of stream at a frame boundary; io fault on a mid-frame
// cut; malformed fault on a length prefix past the cap.
inline std::optional<Frame> read_frame(ByteStream& stream) {
    uint8_t header[5];
    const std::size_t first = stream.read_upto(header, 5);
    if (first == 0) return std::nullopt;
    if (first < 5) stream.read_exact(header + first, 5 - first, "frame header");
    uint32_t len = 0;
    std::memcpy(&len, header, 4);
    if (len > kMaxFramePayload) fault(FaultCode::malformed, "frame: length prefix past the cap");
    Frame f;
    f.type = static_cast<MsgType>(header[4]);
    f.payload.resize(len);
    if (len > 0) stream.read_exact(f.payload.data(), len, "frame payload");
    return f;
}

// ============================================================================
// Message payloads
// ============================================================================

struct HelloPayload {
    uint16_t version = 0;
    uint64_t params_hash = 0;
};

struct FaultPayload {
    WireFault code{};
    std::string text;
};

namespace wire_detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Cursor {
    const std::vector<uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > buf.size())
            fault(FaultCode::malformed, std::string("truncated payload while reading ") + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return buf[pos++];
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64(const char* what) {
        const uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::vector<uint8_t> blob(const char* what) {
        const uint32_t n = u32(what);
        need(n, what);
        std::vector<uint8_t> out(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                 buf.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return out;
    }
    void expect_end() {
        if (pos != buf.size()) fault(FaultCode::malformed, "trailing bytes in payload");
    }
};

} // namespace wire_detail

inline std::vector<uint8_t> encode_hello(uint16_t version, uint64_t params_hash) {
    std::vector<uint8_t> out;
    wire_detail::put_u16(out, version);
    wire_detail::put_u64(out, params_hash);
    return out;
}

inline HelloPayload decode_hello(const std::vector<uint8_t>& payload) {
    wire_detail::Cursor c{payload};
    HelloPayload h;
    h.version = c.u16("hello version");
    h.params_hash = c.u64("hello params hash");
    c.expect_end();
    return h;
}

inline std::vector<uint8_t> encode_fault(WireFault code, const std::string& text) {
    std::vector<uint8_t> out;
    out.push_back(static_cast<uint8_t>(code));
    wire_detail::put_u32(out, static_cast<uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    return out;
}

inline FaultPayload decode_fault(const std::vector<uint8_t>& payload) {
    wire_detail::Cursor c{payload};
    FaultPayload f;
    const uint8_t raw = c.u8("fault code");
    if (raw < 1 || raw > 5) fault(FaultCode::malformed, "fault frame: unknown code");
    f.code = static_cast<WireFault>(raw);
    const uint32_t len = c.u32("fault text length");
    c.need(len, "fault text");
    f.text.assign(payload.begin() + static_cast<std::ptrdiff_t>(c.pos),
                  payload.begin() + static_cast<std::ptrdiff_t>(c.pos + len));
    c.pos += len;
    c.expect_end();
    return f;
}

// Wire fault codes map one-to-one onto the matching local fault codes.
inline FaultCode to_fault_code(WireFault w) { return static_cast<FaultCode>(static_cast<uint8_t>(w)); }

} // namespace eqrl

#endif
