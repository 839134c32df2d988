#ifndef EQRL_MDP_HPP
#define EQRL_MDP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "eqrl/fault.hpp"
#include "eqrl/rng.hpp"

namespace eqrl {

// ============================================================================
// Finite MDP
// ============================================================================

struct Mdp {
    int num_states = 0;
    int num_actions = 0;
    double discount = 0.0;
    std::vector<double> transition; // P(s2 | s,a) at (s*A + a)*S + s2
    std::vector<double> reward;     // r(s,a) at s*A + a

    double p(int s, int a, int s2) const {
        return transition[static_cast<std::size_t>((s * num_actions + a) * num_states + s2)];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s * num_actions + a)]; }

    void validate() const {
        if (num_states <= 0 || num_actions <= 0)
            fault(FaultCode::bad_argument, "mdp: state and action counts must be positive");
        if (!(discount >= 0.0) || !(discount < 1.0))
            fault(FaultCode::bad_argument, "mdp: discount must lie in [0,1)");
        const std::size_t sa = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions);
        if (reward.size() != sa || transition.size() != sa * static_cast<std::size_t>(num_states))
            fault(FaultCode::bad_argument, "mdp: table sizes do not match the state and action counts");
        for (double rv : reward)
            if (!std::isfinite(rv)) fault(FaultCode::bad_argument, "mdp: non-finite reward");
        for (int s = 0; s < num_states; ++s) {
            for (int a = 0; a < num_actions; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < num_states; ++s2) {
                    const double pv = p(s, a, s2);
                    if (!(pv >= 0.0) || !(pv <= 1.0))
                        fault(FaultCode::bad_argument, "mdp: transition probability outside [0,1]");
                    sum += pv;
                }
                if (std::fabs(sum - 1.0) > 1e-12)
                    fault(FaultCode::bad_argument, "mdp: transition row does not sum to 1");
            }
        }
    }

    int sample_next(int s, int a, Rng& rng) const {
        const double u = rng.next_double();
        double acc = 0.0;
        for (int s2 = 0; s2 < num_states; ++s2) {
            acc += p(s, a, s2);
            if (u < acc) return s2;
        }
        return num_states - 1; // u landed in the rounding slack at the top
    }
};

// ============================================================================
// Text format: header `states actions gamma`, then one row per (s,a):
// `s a r p(0) .. p(states-1)`. Rows whose probabilities stray from 1 by more
// than 1e-9 are rejected; accepted rows are renormalized exactly.
// ============================================================================

inline Mdp parse_mdp(std::istream& in) {
    std::vector<std::string> lines;
    std::string raw;
    while (std::getline(in, raw)) {
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.resize(hash);
        std::istringstream probe(raw);
        std::string tok;
        if (probe >> tok) lines.push_back(raw);
    }
    if (lines.empty()) fault(FaultCode::malformed, "mdp file: missing header line");

    Mdp mdp;
    {
        std::istringstream header(lines[0]);
        if (!(header >> mdp.num_states >> mdp.num_actions >> mdp.discount))
            fault(FaultCode::malformed, "mdp file: header must be `states actions gamma`");
        std::string extra;
        if (header >> extra) fault(FaultCode::malformed, "mdp file: trailing tokens after header");
    }
    if (mdp.num_states <= 0 || mdp.num_actions <= 0)
        fault(FaultCode::malformed, "mdp file: non-positive dimensions");
    const std::size_t sa = static_cast<std::size_t>(mdp.num_states) * static_cast<std::size_t>(mdp.num_actions);
    if (lines.size() - 1 != sa)
        fault(FaultCode::malformed, "mdp file: expected exactly one row per state-action pair");

    mdp.reward.assign(sa, 0.0);
    mdp.transition.assign(sa * static_cast<std::size_t>(mdp.num_states), 0.0);
    std::vector<bool> seen(sa, false);
    for (std::size_t row = 1; row < lines.size(); ++row) {
        std::istringstream ls(lines[row]);
        int s = -1, a = -1;
        double r = 0.0;
        if (!(ls >> s >> a >> r)) fault(FaultCode::malformed, "mdp file: malformed row prefix");
        if (s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions)
            fault(FaultCode::malformed, "mdp file: state or action index out of range");
        const std::size_t idx = static_cast<std::size_t>(s * mdp.num_actions + a);
        if (seen[idx]) fault(FaultCode::malformed, "mdp file: duplicate state-action row");
        seen[idx] = true;
        mdp.reward[idx] = r;

        double sum = 0.0;
        for (int s2 = 0; s2 < mdp.num_states; ++s2) {
            double pv;
            if (!(ls >> pv)) fault(FaultCode::malformed, "mdp file: too few probabilities in row");
            if (!(pv >= 0.0)) fault(FaultCode::malformed, "mdp file: negative probability");
            mdp.transition[idx * static_cast<std::size_t>(mdp.num_states) + static_cast<std::size_t>(s2)] = pv;
            sum += pv;
        }
        std::string extra;
        if (ls >> extra) fault(FaultCode::malformed, "mdp file: trailing tokens in row");
        if (std::fabs(sum - 1.0) > 1e-9)
            fault(FaultCode::malformed, "mdp file: row probabilities sum outside 1 +/- 1e-9");
        for (int s2 = 0; s2 < mdp.num_states; ++s2)
            mdp.transition[idx * static_cast<std::size_t>(mdp.num_states) + static_cast<std::size_t>(s2)] /= sum;
    }
    mdp.validate();
    return mdp;
}

inline Mdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) fault(FaultCode::io, "cannot open mdp file: " + path);
    return parse_mdp(in);
}

// ============================================================================
// Q-table with visit and accepted-update counters
// ============================================================================

class QTable {
public:
    QTable() = default;
    QTable(int num_states, int num_actions)
        : s_(num_states),
          a_(num_actions),
          values_(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions), 0.0),
          n_sa_(values_.size(), 0),
          m_sa_(values_.size(), 0),
          n_s_(static_cast<std::size_t>(num_states), 0) {
        if (num_states <= 0 || num_actions <= 0)
            fault(FaultCode::bad_argument, "qtable: dimensions must be positive");
    }

    int num_states() const { return s_; }
    int num_actions() const { return a_; }

    double value(int s, int a) const { return values_[idx(s, a)]; }
    void set_value(int s, int a, double v) { values_[idx(s, a)] = v; }
    const std::vector<double>& values() const { return values_; }

    uint64_t n(int s, int a) const { return n_sa_[idx(s, a)]; }
    uint64_t m(int s, int a) const { return m_sa_[idx(s, a)]; }
    uint64_t n_state(int s) const { return n_s_[check_s(s)]; }

    void count_visit(int s, int a) {
        ++n_sa_[idx(s, a)];
        ++n_s_[static_cast<std::size_t>(s)];
    }
    void count_state_visit(int s) { ++n_s_[check_s(s)]; }
    void count_pair_visit(int s, int a) { ++n_sa_[idx(s, a)]; }

    // an accepted update landed; m may never pass n
    void count_applied(int s, int a) {
        const std::size_t i = idx(s, a);
        if (m_sa_[i] + 1 > n_sa_[i])
            fault(FaultCode::bad_state, "qtable: applied updates would exceed visits");
        ++m_sa_[i];
    }

private:
    std::size_t check_s(int s) const {
        if (s < 0 || s >= s_) fault(FaultCode::bad_argument, "qtable: state index out of range");
        return static_cast<std::size_t>(s);
    }
    std::size_t idx(int s, int a) const {
        if (s < 0 || s >= s_ || a < 0 || a >= a_)
            fault(FaultCode::bad_argument, "qtable: index out of range");
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(a_) + static_cast<std::size_t>(a);
    }

    int s_ = 0, a_ = 0;
    std::vector<double> values_;
    std::vector<uint64_t> n_sa_, m_sa_;
    std::vector<uint64_t> n_s_;
};

// ============================================================================
// Policies
// ============================================================================

struct LearningSchedule {
    enum class Kind { constant, robbins_monro } kind = Kind::robbins_monro;
    double value = 1.0; // constant alpha, or a0 for a0/(n+1)

    double alpha_at(uint64_t n) const {
        if (kind == Kind::constant) return value;
        return value / static_cast<double>(n + 1);
    }

    static LearningSchedule constant(double alpha) {
        if (!(alpha > 0.0) || !(alpha <= 1.0))
            fault(FaultCode::bad_argument, "schedule: constant alpha must lie in (0,1]");
        return {Kind::constant, alpha};
    }
    static LearningSchedule robbins_monro(double a0) {
        if (!(a0 > 0.0) || !(a0 <= 1.0))
            fault(FaultCode::bad_argument, "schedule: a0 must lie in (0,1]");
        return {Kind::robbins_monro, a0};
    }
};

struct PolicyConfig {
    double exploration_c = 0.5; // epsilon numerator, in (0,1)
    LearningSchedule schedule = LearningSchedule::robbins_monro(1.0);
    uint64_t rng_seed = 1;

    void validate() const {
        if (!(exploration_c > 0.0) || !(exploration_c < 1.0))
            fault(FaultCode::bad_argument, "policy: exploration constant must lie in (0,1)");
    }
};

inline int greedy_action(const QTable& q, int s) {
    int best = 0;
    double best_v = q.value(s, 0);
    for (int a = 1; a < q.num_actions(); ++a) {
        const double v = q.value(s, a);
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

// epsilon = min(1, c / max(1, n(s))); explore uniformly, otherwise greedy.
inline int epsilon_greedy_select(const QTable& q, int s, const PolicyConfig& cfg, Rng& rng) {
    const uint64_t visits = q.n_state(s);
    const double eps = std::min(1.0, cfg.exploration_c / static_cast<double>(std::max<uint64_t>(1, visits)));
    if (rng.next_double() < eps)
        return static_cast<int>(rng.next_below(static_cast<uint64_t>(q.num_actions())));
    return greedy_action(q, s);
}

// ============================================================================
// Exact planning oracle
// ============================================================================

struct ValueIterationResult {
    std::vector<double> v;       // V*(s)
    std::vector<double> q;       // Q*(s,a) at s*A + a
    double residual = 0.0;
    uint64_t sweeps = 0;
};

inline ValueIterationResult value_iteration(const Mdp& mdp, double tol) {
    mdp.validate();
    if (!(tol > 0.0)) fault(FaultCode::bad_argument, "value_iteration: tolerance must be positive");
    const int S = mdp.num_states, A = mdp.num_actions;
    ValueIterationResult out;
    out.v.assign(static_cast<std::size_t>(S), 0.0);
    out.q.assign(static_cast<std::size_t>(S) * static_cast<std::size_t>(A), 0.0);

    const uint64_t max_sweeps = 100000000;
    std::vector<double> next(out.v.size(), 0.0);
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double qv = mdp.r(s, a);
                for (int s2 = 0; s2 < S; ++s2) qv += mdp.discount * mdp.p(s, a, s2) * out.v[static_cast<std::size_t>(s2)];
                best = std::max(best, qv);
            }
            if (!std::isfinite(best)) fault(FaultCode::bad_state, "value_iteration: non-finite value");
            residual = std::max(residual, std::fabs(best - out.v[static_cast<std::size_t>(s)]));
            next[static_cast<std::size_t>(s)] = best;
        }
        out.v.swap(next);
        out.residual = residual;
        if (residual <= tol) break;
    }
    if (out.residual > tol) fault(FaultCode::bad_state, "value_iteration: did not reach tolerance");

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double qv = mdp.r(s, a);
            for (int s2 = 0; s2 < S; ++s2) qv += mdp.discount * mdp.p(s, a, s2) * out.v[static_cast<std::size_t>(s2)];
            out.q[static_cast<std::size_t>(s * A + a)] = qv;
        }
    }
    return out;
}

} // namespace eqrl

#endif
