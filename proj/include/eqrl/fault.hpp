#ifndef EQRL_FAULT_HPP
#define EQRL_FAULT_HPP

#include <stdexcept>
#include <string>

namespace eqrl {

// Fault codes shared between library errors and wire-level Fault frames.
// Codes 1..5 are fixed by the protocol; codes >= 16 are local-only.
enum class FaultCode : int {
    malformed = 1,        // unparseable frame or payload
    params_mismatch = 2,  // params hash disagreement
    missing_relin_key = 3,
    evaluation = 4,       // HE evaluation failed on the cloud
    internal = 5,

    bad_argument = 16,    // local API misuse
    bad_state = 17,       // operation invalid in current object state
    io = 18,              // file or socket error
    overflow = 19,        // encoding overflow / scale underflow
};

class Fault : public std::runtime_error {
public:
    Fault(FaultCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    FaultCode code() const noexcept { return code_; }

private:
    FaultCode code_;
};

[[noreturn]] inline void fault(FaultCode code, const std::string& what) {
    throw Fault(code, what);
}

} // namespace eqrl

#endif
