#ifndef EQRL_CARTPOLE_HPP
#define EQRL_CARTPOLE_HPP

// Force-controlled cart on a track with a uniform pole hinged on top, Euler
// integration. A boxes discretizer folds the four continuous coordinates into
// 162 boxes plus one terminal index so the tabular learner can drive it.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "eqrl/learner.hpp"

namespace eqrl {

struct CartPoleState {
    double x = 0.0;         // cart position, m
    double x_dot = 0.0;     // cart velocity, m/s
    double theta = 0.0;     // pole angle from upright, rad
    double theta_dot = 0.0; // pole angular velocity, rad/s
};

namespace cartpole_detail {

inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfLength;
inline constexpr double kForce = 10.0;
inline constexpr double kTau = 0.02;

inline constexpr double kDeg = std::numbers::pi / 180.0;
inline constexpr double kXLimit = 2.4;
inline constexpr double kThetaLimit = 12.0 * kDeg;

} // namespace cartpole_detail

inline bool cartpole_terminal(const CartPoleState& s) {
    return std::fabs(s.x) > cartpole_detail::kXLimit ||
           std::fabs(s.theta) > cartpole_detail::kThetaLimit;
}

// One Euler step under an arbitrary horizontal force. No terminal check, so
// free-swing probes can integrate through any angle.
inline CartPoleState cartpole_advance(const CartPoleState& s, double force) {
    using namespace cartpole_detail;
    const double cos_t = std::cos(s.theta);
    const double sin_t = std::sin(s.theta);
    const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_t) / kTotalMass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
    CartPoleState n;
    n.x = s.x + kTau * s.x_dot;
    n.x_dot = s.x_dot + kTau * x_acc;
    n.theta = s.theta + kTau * s.theta_dot;
    n.theta_dot = s.theta_dot + kTau * theta_acc;
    return n;
}

struct CartPoleStep {
    CartPoleState state;
    double reward = 0.0;
    bool terminal = false;
};

// action 0 pushes left, 1 pushes right. Reward 1 for surviving the step, 0
// for the step that enters the terminal region.
inline CartPoleStep cartpole_step(const CartPoleState& s, int action) {
    if (cartpole_terminal(s)) fault(FaultCode::bad_state, "cartpole: step from a terminal state");
    if (action != 0 && action != 1) fault(FaultCode::bad_argument, "cartpole: action must be 0 or 1");
    CartPoleStep out;
    out.state = cartpole_advance(s, action == 1 ? cartpole_detail::kForce : -cartpole_detail::kForce);
    out.terminal = cartpole_terminal(out.state);
    out.reward = out.terminal ? 0.0 : 1.0;
    return out;
}

// ============================================================================
// Boxes discretizer: 3 x-bins x 3 x_dot-bins x 6 theta-bins x 3 theta_dot-bins
// ============================================================================

inline constexpr int kCartPoleBoxes = 162;
inline constexpr int kCartPoleTerminalIndex = kCartPoleBoxes;
inline constexpr int kCartPoleStates = kCartPoleBoxes + 1;

namespace cartpole_detail {

// half-open [lo, hi) everywhere; a boundary value lands in the upper bin
inline int bin3(double v, double lo, double hi) { return v < lo ? 0 : (v < hi ? 1 : 2); }

inline int theta_bin(double theta) {
    if (theta < -6.0 * kDeg) return 0;
    if (theta < -1.0 * kDeg) return 1;
    if (theta < 0.0) return 2;
    if (theta < 1.0 * kDeg) return 3;
    if (theta < 6.0 * kDeg) return 4;
    return 5;
}

} // namespace cartpole_detail

inline int cartpole_index(const CartPoleState& s) {
    using namespace cartpole_detail;
    if (cartpole_terminal(s)) return kCartPoleTerminalIndex;
    const int xb = bin3(s.x, -0.8, 0.8);
    const int xdb = bin3(s.x_dot, -0.5, 0.5);
    const int tb = theta_bin(s.theta);
    const int tdb = bin3(s.theta_dot, -50.0 * kDeg, 50.0 * kDeg);
    return ((xb * 3 + xdb) * 6 + tb) * 3 + tdb;
}

// ============================================================================
// Environment adapter for the learner
// ============================================================================

// Episodes start uniformly in [-0.05, 0.05] on every coordinate. The discrete
// index passed back by the learner is ignored; the continuous state governs.
class CartPoleEnv {
public:
    explicit CartPoleEnv(double discount = 0.99) : gamma_(discount) {
        if (!(discount >= 0.0) || !(discount < 1.0))
            fault(FaultCode::bad_argument, "cartpole: discount must lie in [0,1)");
    }

    int reset(Rng& rng) {
        state_.x = uniform_start(rng);
        state_.x_dot = uniform_start(rng);
        state_.theta = uniform_start(rng);
        state_.theta_dot = uniform_start(rng);
        return cartpole_index(state_);
    }

    EnvStep step(int, int a, Rng&) {
        const CartPoleStep st = cartpole_step(state_, a);
        state_ = st.state;
        EnvStep out;
        out.reward = st.reward;
        out.next_state = cartpole_index(state_);
        out.terminal = st.terminal;
        return out;
    }

    int num_states() const { return kCartPoleStates; }
    int num_actions() const { return 2; }
    double gamma() const { return gamma_; }
    const CartPoleState& state() const { return state_; }

private:
    static double uniform_start(Rng& rng) { return 0.1 * rng.next_double() - 0.05; }

    CartPoleState state_;
    double gamma_;
};

// ============================================================================
// Episode evaluation
// ============================================================================

enum class EpisodePolicy { greedy, random };

struct EpisodeTraceRow {
    uint64_t t = 0;
    CartPoleState state; // before the action
    int action = 0;
    double reward = 0.0;
    int state_index = 0;
};

struct EpisodeResult {
    uint64_t steps = 0; // step() calls made before termination or the cap
    double total_reward = 0.0;
    bool reached_cap = false;
    std::vector<EpisodeTraceRow> trace;
};

inline EpisodeResult run_episode(const QTable& q, EpisodePolicy policy, Rng& rng, uint64_t max_steps,
                                 bool record_trace = false) {
    if (q.num_states() != kCartPoleStates || q.num_actions() != 2)
        fault(FaultCode::bad_argument, "episode: table shape does not match the cart-pole layout");
    EpisodeResult out;
    CartPoleState s;
    s.x = 0.1 * rng.next_double() - 0.05;
    s.x_dot = 0.1 * rng.next_double() - 0.05;
    s.theta = 0.1 * rng.next_double() - 0.05;
    s.theta_dot = 0.1 * rng.next_double() - 0.05;
    for (uint64_t t = 0; t < max_steps; ++t) {
        const int idx = cartpole_index(s);
        const int a = policy == EpisodePolicy::random ? static_cast<int>(rng.next_below(2))
                                                      : greedy_action(q, idx);
        const CartPoleStep st = cartpole_step(s, a);
        if (record_trace) out.trace.push_back({t, s, a, st.reward, idx});
        ++out.steps;
        out.total_reward += st.reward;
        if (st.terminal) return out;
        s = st.state;
    }
    out.reached_cap = true;
    return out;
}

inline double mean_episode_length(const QTable& q, EpisodePolicy policy, Rng& rng, int episodes,
                                  uint64_t max_steps) {
    if (episodes < 1) fault(FaultCode::bad_argument, "episode: need at least one episode");
    double sum = 0.0;
    for (int e = 0; e < episodes; ++e)
        sum += static_cast<double>(run_episode(q, policy, rng, max_steps).steps);
    return sum / static_cast<double>(episodes);
}

} // namespace eqrl

#endif
