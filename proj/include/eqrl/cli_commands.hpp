#ifndef EQRL_CLI_COMMANDS_HPP
#define EQRL_CLI_COMMANDS_HPP

// Command implementations behind the CLI, kept out of main() so the test
// suite can drive them directly. Every command is deterministic for a fixed
// config except wall-clock timing columns.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include "eqrl/acceptance.hpp"

namespace eqrl {

struct RunConfig {
    uint64_t seed = 1;
    uint64_t steps = 100000;        // train-plain, train-blocking
    uint64_t latency = 3;           // train-blocking
    uint64_t batch = 512;           // train-encrypted: records per batch (L)
    uint64_t batches = 100;         // train-encrypted
    uint64_t reps = 100;            // bench-he
    uint64_t snapshot_every = 1000; // learning-curve granularity
    std::string profile = "test-small";
    std::string mdp = "cartpole";   // "cartpole" or a .mdp file path
    std::string out_dir = "out";
    std::string data_dir;           // chain5.mdp, blocking_golden.txt
};

// ============================================================================
// Config file and environment
// ============================================================================

namespace cli_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos, 10);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        fault(FaultCode::bad_argument, "config: " + key + " wants an unsigned integer, got '" + v + "'");
    }
}

} // namespace cli_detail

inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fault(FaultCode::bad_argument, "config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = cli_detail::trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fault(FaultCode::bad_argument,
                  "config: line " + std::to_string(lineno) + " of " + path + " is not key = value");
        const std::string key = cli_detail::trim(line.substr(0, eq));
        const std::string value = cli_detail::trim(line.substr(eq + 1));
        if (key.empty())
            fault(FaultCode::bad_argument, "config: empty key on line " + std::to_string(lineno));
        kv[key] = value; // last occurrence wins
    }
    return kv;
}

// File values fill every field the command line left untouched; flags win.
inline void apply_file_config(RunConfig& cfg, const std::map<std::string, std::string>& kv,
                              const std::set<std::string>& from_flags) {
    using cli_detail::parse_u64;
    for (const auto& [key, value] : kv) {
        if (from_flags.count(key)) continue;
        if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "steps") cfg.steps = parse_u64(key, value);
        else if (key == "latency") cfg.latency = parse_u64(key, value);
        else if (key == "batch") cfg.batch = parse_u64(key, value);
        else if (key == "batches") cfg.batches = parse_u64(key, value);
        else if (key == "reps") cfg.reps = parse_u64(key, value);
        else if (key == "snapshot_every") cfg.snapshot_every = parse_u64(key, value);
        else if (key == "profile") cfg.profile = value;
        else if (key == "mdp") cfg.mdp = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "data_dir") cfg.data_dir = value;
        else fault(FaultCode::bad_argument, "config: unknown key '" + key + "'");
    }
}

// EQRL_SEED wins over both the file and the flags.
inline void apply_env_overrides(RunConfig& cfg) {
    if (const char* e = std::getenv("EQRL_SEED")) cfg.seed = cli_detail::parse_u64("EQRL_SEED", e);
}

// ============================================================================
// Artifact writers
// ============================================================================

namespace cli_detail {

inline void require_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fault(FaultCode::io, "cannot create output directory " + dir + ": " + ec.message());
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) fault(FaultCode::io, "cannot write " + path);
    return f;
}

inline std::string num(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

inline void write_q_csv(const std::string& path, const QTable& q) {
    std::ofstream f = open_out(path);
    f << "s,a,q,n,m\n";
    for (int s = 0; s < q.num_states(); ++s)
        for (int a = 0; a < q.num_actions(); ++a)
            f << s << ',' << a << ',' << num(q.value(s, a)) << ',' << q.n(s, a) << ',' << q.m(s, a)
              << '\n';
}

inline void write_curve_csv(const std::string& path,
                            const std::vector<std::pair<uint64_t, std::vector<double>>>& snapshots,
                            const std::vector<double>* qstar) {
    std::ofstream f = open_out(path);
    f << (qstar ? "step,max_abs_q,dist_qstar\n" : "step,max_abs_q\n");
    for (const auto& [step, values] : snapshots) {
        double mx = 0.0, dist = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            mx = std::max(mx, std::fabs(values[i]));
            if (qstar) dist = std::max(dist, std::fabs(values[i] - (*qstar)[i]));
        }
        f << step << ',' << num(mx);
        if (qstar) f << ',' << num(dist);
        f << '\n';
    }
}

inline void write_trace_csv(const std::string& path, const std::vector<StepTraceRow>& trace) {
    std::ofstream f = open_out(path);
    f << "step,s,a,reward,accepted,entry_updated,q_value\n";
    for (const StepTraceRow& r : trace)
        f << r.step << ',' << r.s << ',' << r.a << ',' << num(r.reward) << ','
          << (r.accepted ? 1 : 0) << ',' << (r.entry_updated ? 1 : 0) << ',' << num(r.q_value)
          << '\n';
}

inline void write_training_curve_csv(const std::string& path,
                                     const std::vector<TrainingCurveRow>& curve) {
    std::ofstream f = open_out(path);
    f << "batch,steps,episodes,mean_reward,max_abs_q,shadow_deviation\n";
    for (const TrainingCurveRow& r : curve)
        f << r.batch << ',' << r.steps << ',' << r.episodes << ',' << num(r.mean_reward) << ','
          << num(r.max_abs_q) << ',' << num(r.shadow_deviation) << '\n';
}

inline void write_episode_trace_csv(const std::string& path, const EpisodeResult& ep) {
    std::ofstream f = open_out(path);
    f << "t,x,x_dot,theta,theta_dot,action,reward,state_index\n";
    for (const EpisodeTraceRow& r : ep.trace)
        f << r.t << ',' << num(r.state.x) << ',' << num(r.state.x_dot) << ',' << num(r.state.theta)
          << ',' << num(r.state.theta_dot) << ',' << r.action << ',' << num(r.reward) << ','
          << r.state_index << '\n';
}

inline double client_ms(const OpCounter& ops) {
    return ops.ms[static_cast<std::size_t>(OpType::encode)] +
           ops.ms[static_cast<std::size_t>(OpType::encrypt)] +
           ops.ms[static_cast<std::size_t>(OpType::decrypt)] +
           ops.ms[static_cast<std::size_t>(OpType::decode)];
}

inline PolicyConfig policy_for(const RunConfig& cfg, bool cartpole) {
    PolicyConfig pc;
    pc.exploration_c = 0.5;
    // the continuing chain uses decaying steps; the episodic task a constant
    pc.schedule = cartpole ? LearningSchedule::constant(0.1) : LearningSchedule::robbins_monro(1.0);
    pc.rng_seed = cfg.seed;
    return pc;
}

inline void report_cartpole_policy(const QTable& q, uint64_t seed, const std::string& out_dir,
                                   std::ostream& log) {
    Rng eval_rng(seed ^ 0x5555);
    const double greedy = mean_episode_length(q, EpisodePolicy::greedy, eval_rng, 100, 10000);
    Rng base_rng(seed ^ 0xabcdef);
    const double baseline = mean_episode_length(q, EpisodePolicy::random, base_rng, 100, 10000);
    Rng trace_rng(seed ^ 0x777);
    const EpisodeResult ep = run_episode(q, EpisodePolicy::greedy, trace_rng, 10000, true);
    write_episode_trace_csv(out_dir + "/episode_trace.csv", ep);
    log << "greedy mean episode length " << num(greedy) << " vs random baseline " << num(baseline)
        << " over 100 episodes (cap 10000)\n";
}

// Shared body of train-plain and train-blocking.
template <class Env>
int train_and_emit(Env& env, const Mdp* mdp, const RunConfig& cfg, bool blocking,
                   std::ostream& log) {
    const PolicyConfig pc = policy_for(cfg, mdp == nullptr);
    RunOptions opt;
    opt.steps = cfg.steps;
    opt.snapshot_every = cfg.snapshot_every;
    opt.record_trace = blocking;
    const RunResult res =
        blocking ? run_blocking_sarsa(env, pc, cfg.latency, opt) : run_vanilla_sarsa(env, pc, opt);

    require_dir(cfg.out_dir);
    std::vector<double> qstar;
    if (mdp) qstar = value_iteration(*mdp, 1e-12).q;
    write_curve_csv(cfg.out_dir + "/learning_curve.csv", res.snapshots, mdp ? &qstar : nullptr);
    write_q_csv(cfg.out_dir + "/q_final.csv", res.q);
    if (blocking) write_trace_csv(cfg.out_dir + "/trace.csv", res.trace);

    log << "steps " << cfg.steps << ", accepted " << res.accepted_count << ", rejected "
        << res.rejected_count << ", applied " << res.applied_count << "\n";
    if (mdp) {
        double dist = 0.0;
        for (std::size_t i = 0; i < qstar.size(); ++i)
            dist = std::max(dist, std::fabs(res.q.values()[i] - qstar[i]));
        log << "max-norm distance to the planning solution: " << num(dist) << "\n";
    } else {
        report_cartpole_policy(res.q, cfg.seed, cfg.out_dir, log);
    }
    log << "artifacts in " << cfg.out_dir << "\n";
    return 0;
}

template <class F>
int with_env(const RunConfig& cfg, F&& body) {
    if (cfg.mdp == "cartpole") {
        CartPoleEnv env(0.99);
        return body(env, static_cast<const Mdp*>(nullptr));
    }
    if (!std::filesystem::exists(cfg.mdp))
        fault(FaultCode::bad_argument, "mdp: no such file: " + cfg.mdp + " (or use 'cartpole')");
    const Mdp mdp = load_mdp(cfg.mdp);
    MdpEnv env(mdp, 0);
    return body(env, &mdp);
}

} // namespace cli_detail

// ============================================================================
// Commands
// ============================================================================

inline int cmd_train_plain(const RunConfig& cfg, std::ostream& log) {
    return cli_detail::with_env(cfg, [&](auto& env, const Mdp* mdp) {
        return cli_detail::train_and_emit(env, mdp, cfg, false, log);
    });
}

inline int cmd_train_blocking(const RunConfig& cfg, std::ostream& log) {
    if (cfg.latency < 1) fault(FaultCode::bad_argument, "latency must be at least 1");
    return cli_detail::with_env(cfg, [&](auto& env, const Mdp* mdp) {
        return cli_detail::train_and_emit(env, mdp, cfg, true, log);
    });
}

inline int cmd_train_encrypted(const RunConfig& cfg, std::ostream& log) {
    if (cfg.profile != "table1" && cfg.profile != "test-small")
        fault(FaultCode::bad_argument, "profile must be table1 or test-small");
    if (cfg.batches < 1) fault(FaultCode::bad_argument, "batches must be at least 1");
    const ContextPtr ctx = make_context(params_by_name(cfg.profile));
    if (cfg.batch < 1 || cfg.batch > ctx->slot_count())
        fault(FaultCode::bad_argument, "batch must be in [1, " + std::to_string(ctx->slot_count()) +
                                           "] for profile " + cfg.profile);
    const bool cartpole = cfg.mdp == "cartpole";
    if (!cartpole && !std::filesystem::exists(cfg.mdp))
        fault(FaultCode::bad_argument, "mdp: no such file: " + cfg.mdp + " (or use 'cartpole')");

    Rng key_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const KeySet keys = keygen(ctx, key_rng);

    CloudService cloud(ctx);
    auto [client_end, server_end] = make_duplex_pair();
    StreamPtr server_stream = server_end;
    std::thread worker([&cloud, server_stream] {
        cloud.serve_connection(*server_stream);
        server_stream->close();
    });

    EncryptedTrainingResult res;
    try {
        ClientSession session(client_end, keys, cfg.seed);
        session.upload_relin_key();
        const PolicyConfig pc = cli_detail::policy_for(cfg, cartpole);
        if (cartpole) {
            // optimistic start at the value ceiling 1/(1-gamma), see README
            res = run_encrypted_training(CartPoleEnv(0.99), pc, cfg.batch, cfg.batches, session,
                                         100.0);
        } else {
            res = run_encrypted_training(MdpEnv(load_mdp(cfg.mdp), 0), pc, cfg.batch, cfg.batches,
                                         session);
        }
        session.bye();
    } catch (...) {
        client_end->close();
        worker.join();
        throw;
    }
    worker.join();

    cli_detail::require_dir(cfg.out_dir);
    cli_detail::write_training_curve_csv(cfg.out_dir + "/learning_curve.csv", res.curve);
    cli_detail::write_q_csv(cfg.out_dir + "/q_final.csv", res.q);

    OpCounter combined = res.client_ops;
    combined += res.cloud_ops;
    {
        std::ofstream f = cli_detail::open_out(cfg.out_dir + "/op_report.tsv");
        write_op_report(f, combined, res.batches);
    }
    const double share = 100.0 * cli_detail::client_ms(combined) / combined.total_ms();
    {
        std::ofstream f = cli_detail::open_out(cfg.out_dir + "/precision.txt");
        f << "encrypted training precision report\n"
          << "profile: " << cfg.profile << "\n"
          << "batches: " << res.batches << "\n"
          << "batch size (L): " << cfg.batch << "\n"
          << "steps: " << res.steps << ", episodes: " << res.episodes << "\n"
          << "max relative deviation from the plaintext twin: "
          << cli_detail::num(res.max_shadow_deviation) << " ("
          << cli_detail::num(res.max_shadow_deviation * 100.0) << "%)\n";
    }

    log << "profile " << cfg.profile << ", " << res.batches << " batches of " << cfg.batch << " ("
        << res.steps << " steps, " << res.episodes << " episodes)\n";
    log << "max relative deviation from the plaintext twin: "
        << cli_detail::num(res.max_shadow_deviation) << "\n";
    write_op_report(log, combined, res.batches);
    log << "client-side share of homomorphic wall time (encode/encrypt/decrypt/decode): ";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%\n", share);
    log << buf;
    if (cartpole) cli_detail::report_cartpole_policy(res.q, cfg.seed, cfg.out_dir, log);
    log << "artifacts in " << cfg.out_dir << "\n";
    return 0;
}

inline int cmd_bench_he(const RunConfig& cfg, std::ostream& log) {
    if (cfg.profile != "table1" && cfg.profile != "test-small")
        fault(FaultCode::bad_argument, "profile must be table1 or test-small");
    if (cfg.reps < 100) fault(FaultCode::bad_argument, "bench wants at least 100 reps");
    const ContextPtr ctx = make_context(params_by_name(cfg.profile));
    Rng key_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const KeySet keys = keygen(ctx, key_rng);
    const std::size_t batch = std::min<std::size_t>(1000, ctx->slot_count());

    Rng rng(cfg.seed ^ 0xb5c0fbcf);
    OpCounter discarded;
    for (int i = 0; i < 5; ++i) acceptance_detail::one_batch_update(keys, batch, rng, discarded);
    OpCounter ops;
    for (uint64_t i = 0; i < cfg.reps; ++i)
        acceptance_detail::one_batch_update(keys, batch, rng, ops);

    cli_detail::require_dir(cfg.out_dir);
    {
        std::ofstream f = cli_detail::open_out(cfg.out_dir + "/op_report.tsv");
        write_op_report(f, ops, cfg.reps);
    }
    log << "profile " << cfg.profile << ", batch size " << batch << ", " << cfg.reps
        << " reps, 5 warmup reps discarded; per-batch means:\n";
    write_op_report(log, ops, cfg.reps);
    const double share = 100.0 * cli_detail::client_ms(ops) / ops.total_ms();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%\n", share);
    log << "client-side share of homomorphic wall time (encode/encrypt/decrypt/decode): " << buf;
    log << "report in " << cfg.out_dir << "/op_report.tsv\n";
    return 0;
}

inline int cmd_verify(const RunConfig& cfg, const std::vector<std::string>& selectors,
                      std::ostream& log) {
    static const std::map<std::string, int> names = {
        {"op-counts", 1},  {"precision", 2},   {"circuit-oracle", 3},
        {"golden-trace", 4}, {"chain-convergence", 5}, {"latency-one", 6},
        {"he-units", 7},   {"transport", 8},   {"cartpole", 9}};

    AcceptanceOptions opt;
    opt.data_dir = cfg.data_dir;
    opt.out = &log;
    for (const std::string& sel : selectors) {
        if (const auto it = names.find(sel); it != names.end()) {
            opt.only.push_back(it->second);
        } else if (sel.size() == 1 && sel[0] >= '1' && sel[0] <= '9') {
            opt.only.push_back(sel[0] - '0');
        } else {
            std::string all;
            for (const auto& [name, n] : names) all += (all.empty() ? "" : ", ") + name;
            fault(FaultCode::bad_argument, "unknown criterion '" + sel + "'; use 1-9 or: " + all);
        }
    }

    const std::vector<CriterionResult> results = run_acceptance(opt);
    std::size_t passed = 0;
    for (const CriterionResult& r : results) passed += r.pass ? 1 : 0;
    log << passed << "/" << results.size() << " criteria passed\n";
    return all_passed(results) ? 0 : 2;
}

} // namespace eqrl

#endif
