#ifndef EQRL_LEARNER_HPP
#define EQRL_LEARNER_HPP

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "eqrl/fault.hpp"
#include "eqrl/mdp.hpp"
#include "eqrl/rng.hpp"

namespace eqrl {

// ============================================================================
// Update rules
// ============================================================================

// The scalar contract shared by the plaintext learner and the encrypted
// circuit: new_q = (1-alpha)*q_sa + alpha*(r + gamma*q_next).
inline double sarsa_update(double q_sa, double r, double q_next, double alpha, double gamma) {
    return (1.0 - alpha) * q_sa + alpha * (r + gamma * q_next);
}

// One Q-learning backup in place; alpha is indexed by the visit count of
// (s,a) before this step.
inline void q_learning_step(QTable& q, int s, int a, double r, int s_next,
                            const LearningSchedule& schedule, double gamma) {
    const double alpha = schedule.alpha_at(q.n(s, a));
    const double best_next = q.value(s_next, greedy_action(q, s_next));
    q.set_value(s, a, sarsa_update(q.value(s, a), r, best_next, alpha, gamma));
    q.count_pair_visit(s, a);
}

// ============================================================================
// Transition records and the blocking scheduler
// ============================================================================

// What actually travels to the evaluator: Q values and scalars, no indices
// beyond the routing tuple the client keeps for itself.
struct TransitionRecord {
    double q_sa = 0.0;
    double reward = 0.0;
    double q_next = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    int s = 0, a = 0, s_next = 0, a_next = 0;
    bool terminal = false; // q_next bootstraps from zero; successor entry not comparable

    void validate() const {
        if (!(alpha > 0.0) || !(alpha <= 1.0))
            fault(FaultCode::bad_argument, "record: alpha must lie in (0,1]");
        if (!(gamma >= 0.0) || !(gamma < 1.0))
            fault(FaultCode::bad_argument, "record: gamma must lie in [0,1)");
        for (double v : {q_sa, reward, q_next})
            if (!std::isfinite(v)) fault(FaultCode::bad_argument, "record: non-finite value");
    }
};

struct AppliedUpdate {
    TransitionRecord record;
    uint64_t m_index = 0;
    uint64_t applied_at = 0;
    double old_value = 0.0;
    double new_value = 0.0;
    // value of the successor entry at application time, for the two-form
    // comparison (stale record vs current table)
    double current_q_next = 0.0;
};

// Delayed updates with blocking states: an accepted update on (s,a) blocks
// every entry of row s for the L-1 following steps, and lands at accept+L
// before that step's offer is considered.
class BlockingScheduler {
public:
    explicit BlockingScheduler(int num_states, uint64_t latency)
        : latency_(latency), blocked_(static_cast<std::size_t>(num_states), false) {
        if (latency_ < 1) fault(FaultCode::bad_argument, "scheduler: latency must be at least 1");
    }

    uint64_t clock() const { return clock_; }
    uint64_t latency() const { return latency_; }
    bool is_blocked(int s) const { return blocked_[static_cast<std::size_t>(s)]; }
    std::size_t in_flight_count() const { return jobs_.size(); }

    // Offer the step-t record. Rejected when the origin state is blocked; the
    // caller still counts the visit either way.
    bool offer(const QTable& q, const TransitionRecord& z) {
        z.validate();
        if (blocked_[static_cast<std::size_t>(z.s)]) return false;
        Job job;
        job.record = z;
        job.m_index = q.m(z.s, z.a);
        job.completes_at = clock_ + latency_;
        jobs_.push_back(job);
        blocked_[static_cast<std::size_t>(z.s)] = true;
        return true;
    }

    // Advance to the next step and land every update that is due. Blocking
    // froze the origin entry for the whole flight, so the stale q_sa must
    // still equal the live table; anything else is a scheduler bug.
    std::vector<AppliedUpdate> tick(QTable& q) {
        ++clock_;
        std::vector<AppliedUpdate> applied;
        for (std::size_t i = 0; i < jobs_.size();) {
            if (jobs_[i].completes_at != clock_) {
                ++i;
                continue;
            }
            const Job job = jobs_[i];
            jobs_.erase(jobs_.begin() + static_cast<std::ptrdiff_t>(i));
            const TransitionRecord& z = job.record;
            if (q.value(z.s, z.a) != z.q_sa)
                fault(FaultCode::internal, "scheduler: blocked entry changed while in flight");

            AppliedUpdate log;
            log.record = z;
            log.m_index = job.m_index;
            log.applied_at = clock_;
            log.old_value = q.value(z.s, z.a);
            log.current_q_next = z.terminal ? 0.0 : q.value(z.s_next, z.a_next);
            log.new_value = sarsa_update(z.q_sa, z.reward, z.q_next, z.alpha, z.gamma);
            q.set_value(z.s, z.a, log.new_value);
            q.count_applied(z.s, z.a);
            blocked_[static_cast<std::size_t>(z.s)] = false;
            applied.push_back(log);
        }
        return applied;
    }

private:
    struct Job {
        TransitionRecord record;
        uint64_t m_index = 0;
        uint64_t completes_at = 0;
    };

    uint64_t latency_;
    uint64_t clock_ = 1;
    std::vector<Job> jobs_;
    std::vector<bool> blocked_;
};

// ============================================================================
// Training loops
// ============================================================================

// Environment concept: int reset(Rng&); EnvStep step(int s, int a, Rng&);
// int num_states(); int num_actions(); double gamma().
struct EnvStep {
    double reward = 0.0;
    int next_state = 0;
    bool terminal = false;
};

// Finite MDP as an environment; episodes never terminate.
class MdpEnv {
public:
    explicit MdpEnv(Mdp mdp, int start_state = 0) : mdp_(std::move(mdp)), start_(start_state) {
        mdp_.validate();
        if (start_ < 0 || start_ >= mdp_.num_states)
            fault(FaultCode::bad_argument, "env: start state out of range");
    }

    int reset(Rng&) { return start_; }
    EnvStep step(int s, int a, Rng& rng) {
        EnvStep out;
        out.reward = mdp_.r(s, a);
        out.next_state = mdp_.sample_next(s, a, rng);
        out.terminal = false;
        return out;
    }
    int num_states() const { return mdp_.num_states; }
    int num_actions() const { return mdp_.num_actions; }
    double gamma() const { return mdp_.discount; }
    const Mdp& mdp() const { return mdp_; }

private:
    Mdp mdp_;
    int start_;
};

struct StepTraceRow {
    uint64_t step = 0;
    int s = 0;
    int a = 0;
    double reward = 0.0;
    bool accepted = false;
    bool entry_updated = false;
    double q_value = 0.0;
};

struct RunResult {
    QTable q;
    std::vector<StepTraceRow> trace;
    std::vector<std::pair<uint64_t, std::vector<double>>> snapshots; // (step, Q values)
    uint64_t accepted_count = 0;
    uint64_t rejected_count = 0;
    uint64_t applied_count = 0;
    // applications whose successor entry had moved on since collection;
    // legitimate under blocking, counted for diagnostics
    uint64_t stale_next_count = 0;
};

struct RunOptions {
    uint64_t steps = 0;
    uint64_t snapshot_every = 1000;
    bool record_trace = false;
};

namespace detail {

inline void maybe_snapshot(RunResult& res, uint64_t step, const RunOptions& opt) {
    if (opt.snapshot_every > 0 && step % opt.snapshot_every == 0)
        res.snapshots.emplace_back(step, res.q.values());
}

} // namespace detail

// Plain SARSA(0): every update lands on the step it was produced.
template <class Env>
RunResult run_vanilla_sarsa(Env& env, const PolicyConfig& cfg, const RunOptions& opt) {
    cfg.validate();
    RunResult res;
    res.q = QTable(env.num_states(), env.num_actions());
    Rng rng(cfg.rng_seed);
    Rng policy_rng = rng.split("policy");
    Rng env_rng = rng.split("environment");

    int s = env.reset(env_rng);
    int a = epsilon_greedy_select(res.q, s, cfg, policy_rng);
    res.q.count_state_visit(s);
    for (uint64_t t = 1; t <= opt.steps; ++t) {
        const EnvStep st = env.step(s, a, env_rng);
        int s2 = st.next_state;
        int a2;
        double q_next;
        if (st.terminal) {
            q_next = 0.0;
            s2 = env.reset(env_rng);
            a2 = epsilon_greedy_select(res.q, s2, cfg, policy_rng);
        } else {
            a2 = epsilon_greedy_select(res.q, s2, cfg, policy_rng);
            q_next = res.q.value(s2, a2);
        }
        res.q.count_state_visit(s2);

        const double alpha = cfg.schedule.alpha_at(res.q.n(s, a));
        const double updated = sarsa_update(res.q.value(s, a), st.reward, q_next, alpha, env.gamma());
        res.q.set_value(s, a, updated);
        res.q.count_pair_visit(s, a);
        res.q.count_applied(s, a);
        ++res.accepted_count;
        ++res.applied_count;

        if (opt.record_trace)
            res.trace.push_back({t, s, a, st.reward, true, true, updated});
        detail::maybe_snapshot(res, t, opt);
        s = s2;
        a = a2;
    }
    return res;
}

// SARSA(0) with delayed updates and blocking states. With latency 1 this
// reproduces the vanilla run bit for bit on the same seed.
template <class Env>
RunResult run_blocking_sarsa(Env& env, const PolicyConfig& cfg, uint64_t latency, const RunOptions& opt) {
    cfg.validate();
    RunResult res;
    res.q = QTable(env.num_states(), env.num_actions());
    BlockingScheduler sch(env.num_states(), latency);
    Rng rng(cfg.rng_seed);
    Rng policy_rng = rng.split("policy");
    Rng env_rng = rng.split("environment");

    int s = env.reset(env_rng);
    int a = epsilon_greedy_select(res.q, s, cfg, policy_rng);
    res.q.count_state_visit(s);
    for (uint64_t t = 1; t <= opt.steps; ++t) {
        const EnvStep st = env.step(s, a, env_rng);
        int s2 = st.next_state;
        int a2;
        double q_next;
        if (st.terminal) {
            q_next = 0.0;
            s2 = env.reset(env_rng);
            a2 = epsilon_greedy_select(res.q, s2, cfg, policy_rng);
        } else {
            a2 = epsilon_greedy_select(res.q, s2, cfg, policy_rng);
            q_next = res.q.value(s2, a2);
        }
        res.q.count_state_visit(s2);

        TransitionRecord z;
        z.q_sa = res.q.value(s, a);
        z.reward = st.reward;
        z.q_next = q_next;
        z.alpha = cfg.schedule.alpha_at(res.q.m(s, a));
        z.gamma = env.gamma();
        z.s = s;
        z.a = a;
        z.s_next = s2;
        z.a_next = a2;
        z.terminal = st.terminal;
        const bool accepted = sch.offer(res.q, z);
        res.q.count_pair_visit(s, a);
        accepted ? ++res.accepted_count : ++res.rejected_count;

        const auto applied = sch.tick(res.q);
        res.applied_count += applied.size();
        bool entry_updated = false;
        double q_value = 0.0;
        for (const AppliedUpdate& u : applied) {
            entry_updated = true;
            q_value = u.new_value;
            if (!u.record.terminal && u.current_q_next != u.record.q_next) ++res.stale_next_count;
        }
        if (!entry_updated) q_value = res.q.value(s, a);

        if (opt.record_trace)
            res.trace.push_back({t, s, a, st.reward, accepted, entry_updated, q_value});
        detail::maybe_snapshot(res, t, opt);
        s = s2;
        a = a2;
    }
    return res;
}

// ============================================================================
// Batch collection for the remote evaluator
// ============================================================================

// Drives an environment L steps at a time against a frozen Q-table; the
// caller ships the records out, gets scalar results back, and applies them.
template <class Env>
class BatchSession {
public:
    BatchSession(Env env, const PolicyConfig& cfg)
        : env_(std::move(env)),
          q_(env_.num_states(), env_.num_actions()),
          cfg_(cfg),
          root_(cfg.rng_seed),
          policy_rng_(root_.split("policy")),
          env_rng_(root_.split("environment")) {
        cfg_.validate();
    }

    const QTable& q() const { return q_; }
    QTable& q() { return q_; }
    Env& env() { return env_; }
    uint64_t steps_taken() const { return steps_; }
    uint64_t episodes() const { return episodes_; }

    // L transitions against the current table. Q reads inside one batch all
    // see the pre-batch values because nothing is applied until apply().
    std::vector<TransitionRecord> collect(uint64_t batch_size) {
        if (batch_size < 1) fault(FaultCode::bad_argument, "collect: batch size must be at least 1");
        std::vector<TransitionRecord> records;
        records.reserve(batch_size);
        ensure_started();
        for (uint64_t i = 0; i < batch_size; ++i) {
            const EnvStep st = env_.step(s_, a_, env_rng_);
            ++steps_;
            TransitionRecord z;
            z.q_sa = q_.value(s_, a_);
            z.reward = st.reward;
            z.alpha = cfg_.schedule.alpha_at(q_.m(s_, a_));
            z.gamma = env_.gamma();
            z.s = s_;
            z.a = a_;
            if (st.terminal) {
                z.q_next = 0.0;
                z.s_next = st.next_state;
                z.a_next = 0;
                z.terminal = true;
                ++episodes_;
                const int fresh = env_.reset(env_rng_);
                const int fresh_a = select_and_count(fresh);
                q_.count_pair_visit(s_, a_);
                records.push_back(z);
                s_ = fresh;
                a_ = fresh_a;
                continue;
            }
            const int a2 = select_and_count(st.next_state);
            z.q_next = q_.value(st.next_state, a2);
            z.s_next = st.next_state;
            z.a_next = a2;
            q_.count_pair_visit(s_, a_);
            records.push_back(z);
            s_ = st.next_state;
            a_ = a2;
        }
        return records;
    }

    // Write the evaluated updates back. Duplicate origins resolve last-wins;
    // each record still advances the accepted-update counter.
    void apply(const std::vector<TransitionRecord>& records, const std::vector<double>& results) {
        if (records.size() != results.size())
            fault(FaultCode::bad_argument, "apply: result count does not match record count");
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!std::isfinite(results[i]))
                fault(FaultCode::bad_argument, "apply: non-finite update value");
            q_.set_value(records[i].s, records[i].a, results[i]);
            q_.count_applied(records[i].s, records[i].a);
        }
    }

private:
    void ensure_started() {
        if (started_) return;
        s_ = env_.reset(env_rng_);
        a_ = select_and_count(s_);
        started_ = true;
    }

    int select_and_count(int s) {
        const int a = epsilon_greedy_select(q_, s, cfg_, policy_rng_);
        q_.count_state_visit(s);
        return a;
    }

    Env env_;
    QTable q_;
    PolicyConfig cfg_;
    Rng root_, policy_rng_, env_rng_;
    int s_ = 0, a_ = 0;
    bool started_ = false;
    uint64_t steps_ = 0, episodes_ = 0;
};

} // namespace eqrl

#endif
