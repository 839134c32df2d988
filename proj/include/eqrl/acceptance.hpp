#ifndef EQRL_ACCEPTANCE_HPP
#define EQRL_ACCEPTANCE_HPP

// The project gate: one runner per criterion, each returning the measured
// value, its bound, and a verdict. The verify command and the acceptance
// binary both drive run_acceptance and print one line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "eqrl/cartpole.hpp"
#include "eqrl/client.hpp"
#include "eqrl/cloud.hpp"

namespace eqrl {

struct CriterionResult {
    int number = 0;
    std::string name;
    std::string measured;
    std::string bound;
    bool pass = false;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    std::string data_dir;        // holds chain5.mdp and blocking_golden.txt
    std::ostream* out = nullptr; // progress and report tables while running
    std::vector<int> only;       // criterion numbers to run; empty means all
};

namespace acceptance_detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
CriterionResult timed_criterion(int number, std::string name, std::string bound, double budget_s,
                                F&& body) {
    CriterionResult r;
    r.number = number;
    r.name = std::move(name);
    r.bound = std::move(bound);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        r.pass = body(r);
    } catch (const Fault& f) {
        r.pass = false;
        r.measured = std::string("fault: ") + f.what();
    }
    r.seconds = seconds_since(t0);
    if (r.seconds > budget_s) {
        r.pass = false;
        r.measured += " [over budget: " + fmt("%.1f", r.seconds) + " s > " +
                      fmt("%.0f", budget_s) + " s]";
    }
    return r;
}

inline KeySet seeded_keys(const ContextPtr& ctx, uint64_t seed) {
    Rng key_rng(seed ^ 0x9e3779b97f4a7c15ull);
    return keygen(ctx, key_rng);
}

// deliberately independent of the NTT path: schoolbook negacyclic product
inline std::vector<uint64_t> schoolbook_negacyclic(const std::vector<uint64_t>& a,
                                                   const std::vector<uint64_t>& b, uint64_t q) {
    const std::size_t n = a.size();
    std::vector<uint64_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const uint64_t prod = mul_mod(a[i], b[j], q);
            const std::size_t k = i + j;
            if (k < n)
                out[k] = add_mod(out[k], prod, q);
            else
                out[k - n] = sub_mod(out[k - n], prod, q);
        }
    }
    return out;
}

inline const std::array<uint64_t, 8> kBatchOpCounts = {5, 5, 4, 4, 4, 3, 1, 1};

// one full batch update, timed; returns elapsed seconds, ops accumulate
inline double one_batch_update(const KeySet& keys, std::size_t batch_size, Rng& rng, OpCounter& ops) {
    PackedBatch batch;
    batch.q.resize(batch_size);
    batch.r.resize(batch_size);
    batch.q_next.resize(batch_size);
    batch.alpha.resize(batch_size);
    batch.gamma.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        batch.q[i] = -2.0 + 4.0 * rng.next_double();
        batch.r[i] = -1.0 + 2.0 * rng.next_double();
        batch.q_next[i] = -2.0 + 4.0 * rng.next_double();
        batch.alpha[i] = 1.0 - rng.next_double() * (1.0 - 1e-6);
        batch.gamma[i] = rng.next_double();
    }
    const auto t0 = std::chrono::steady_clock::now();
    const EncryptedBatch enc = pack_and_encrypt(keys, batch, rng, ops);
    const Ciphertext out = evaluate_update(enc, keys.relin, ops);
    decrypt_and_unpack(keys, out, batch_size, ops);
    return seconds_since(t0);
}

} // namespace acceptance_detail

// 1. One encrypted batch update performs exactly the fixed operation multiset.
inline CriterionResult criterion_op_counts(const KeySet& table1, const KeySet& small) {
    using namespace acceptance_detail;
    return timed_criterion(1, "op-count fidelity",
                           "exactly 5/5/4/4/4/3/1/1; < 5 s table1, < 0.5 s test-small",
                           60.0, [&](CriterionResult& r) {
        Rng rng(1001);
        OpCounter big_ops, small_ops;
        const double big_s = one_batch_update(table1, 1000, rng, big_ops);
        const double small_s = one_batch_update(small, 512, rng, small_ops);
        std::ostringstream m;
        m << "counts";
        for (std::size_t t = 0; t < kOpTypeCount; ++t) m << (t ? "/" : " ") << big_ops.count[t];
        m << ", table1 " << fmt("%.3f", big_s) << " s, test-small " << fmt("%.3f", small_s) << " s";
        r.measured = m.str();
        return big_ops.count == kBatchOpCounts && small_ops.count == kBatchOpCounts &&
               big_s < 5.0 && small_s < 0.5;
    });
}

// 2. Precision over >=100 random table1 batches, L=1000, |Q|<=100.
inline CriterionResult criterion_precision(const KeySet& table1) {
    using namespace acceptance_detail;
    return timed_criterion(2, "update precision (table1, L=1000)",
                           "max relative error <= 0.05% over 100 batches; <= 600 s",
                           600.0, [&](CriterionResult& r) {
        Rng rng(1002);
        const PrecisionReport rep = measure_precision(table1, 100, 1000, rng);
        r.measured = "max rel err " + fmt("%.3g", rep.max_batch_relative) + " (" +
                     fmt("%.5f", rep.max_batch_relative * 100.0) +
                     "%), max abs " + fmt("%.3g", rep.max_absolute) +
                     "; reference report: 0.0063%";
        return rep.max_batch_relative <= 5e-4;
    });
}

// 3. Circuit equals the plaintext update formula on bounded inputs.
inline CriterionResult criterion_circuit_oracle(const KeySet& small) {
    using namespace acceptance_detail;
    return timed_criterion(3, "circuit/oracle equivalence (test-small)",
                           "relative error <= 1e-4, 100 fixed-seed trials; <= 120 s",
                           120.0, [&](CriterionResult& r) {
        Rng rng(1003);
        const PrecisionReport rep = measure_precision(small, 100, 64, rng);
        r.measured = "max rel err " + fmt("%.3g", rep.max_batch_relative) + " over " +
                     std::to_string(rep.batches) + " trials";
        return rep.max_batch_relative <= 1e-4;
    });
}

// 4. The reference blocking scenario replays exactly from the golden file.
inline CriterionResult criterion_golden_trace(const std::string& golden_path) {
    using namespace acceptance_detail;
    return timed_criterion(4, "blocking golden trace",
                           "accept flags and revision vector match " + golden_path,
                           10.0, [&](CriterionResult& r) {
        std::ifstream in(golden_path);
        if (!in) {
            r.measured = "cannot open " + golden_path;
            return false;
        }
        std::vector<std::array<int, 4>> steps; // t, s, a, accept
        std::vector<uint64_t> golden_m;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream row(line);
            std::string first;
            row >> first;
            if (first == "m") {
                uint64_t v;
                while (row >> v) golden_m.push_back(v);
            } else {
                std::array<int, 4> st{};
                st[0] = std::stoi(first);
                row >> st[1] >> st[2] >> st[3];
                steps.push_back(st);
            }
        }
        if (steps.size() != 10 || golden_m.size() != 4) {
            r.measured = "golden file malformed (" + golden_path + ")";
            return false;
        }

        QTable q(2, 2);
        q.set_value(0, 0, 0.1);
        q.set_value(0, 1, 0.2);
        q.set_value(1, 0, 0.3);
        q.set_value(1, 1, 0.4);
        BlockingScheduler sch(2, 3);
        const LearningSchedule sched = LearningSchedule::robbins_monro(1.0);
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const auto [tt, s, a, expect] = steps[t];
            TransitionRecord z;
            z.q_sa = q.value(s, a);
            z.reward = 0.1 * static_cast<double>(tt);
            z.q_next = q.value(steps[(t + 1) % steps.size()][1], steps[(t + 1) % steps.size()][2]);
            z.alpha = sched.alpha_at(q.m(s, a));
            z.gamma = 0.5;
            z.s = s;
            z.a = a;
            z.s_next = steps[(t + 1) % steps.size()][1];
            z.a_next = steps[(t + 1) % steps.size()][2];
            const bool accepted = sch.offer(q, z);
            q.count_visit(s, a);
            sch.tick(q);
            if (accepted != (expect == 1)) {
                r.measured = "step " + std::to_string(tt) + ": expected " +
                             (expect ? "accept" : "reject") + ", got " +
                             (accepted ? "accept" : "reject") + " (golden: " + golden_path + ")";
                return false;
            }
        }
        const std::array<std::pair<int, int>, 4> entries = {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const uint64_t got = q.m(entries[i].first, entries[i].second);
            if (got != golden_m[i]) {
                r.measured = "revision count (" + std::to_string(entries[i].first) + "," +
                             std::to_string(entries[i].second) + "): expected " +
                             std::to_string(golden_m[i]) + ", got " + std::to_string(got) +
                             " (golden: " + golden_path + ")";
                return false;
            }
        }
        r.measured = "10 accept flags and revision vector (1,1,0,2) reproduced";
        return true;
    });
}

// 5. Blocking SARSA reaches the planning oracle on the seeded chain.
inline CriterionResult criterion_chain_convergence(const std::string& chain_path) {
    using namespace acceptance_detail;
    return timed_criterion(5, "chain convergence, L in {1,3,10}",
                           "max-norm distance to Q* <= 0.05 within 2e5 steps; <= 60 s",
                           60.0, [&](CriterionResult& r) {
        const Mdp mdp = load_mdp(chain_path);
        const ValueIterationResult vi = value_iteration(mdp, 1e-12);

        PolicyConfig cfg;
        cfg.exploration_c = 0.5;
        cfg.schedule = LearningSchedule::robbins_monro(1.0);
        cfg.rng_seed = 7;
        RunOptions opt;
        opt.steps = 200000;
        opt.snapshot_every = 0;

        std::ostringstream m;
        bool ok = true;
        for (uint64_t latency : {uint64_t{1}, uint64_t{3}, uint64_t{10}}) {
            MdpEnv env(mdp, 0);
            const RunResult res = run_blocking_sarsa(env, cfg, latency, opt);
            double dist = 0.0;
            for (std::size_t i = 0; i < vi.q.size(); ++i)
                dist = std::max(dist, std::fabs(res.q.values()[i] - vi.q[i]));
            m << (latency > 1 ? ", " : "") << "L=" << latency << ": " << fmt("%.4f", dist);
            ok = ok && dist <= 0.05;
        }
        r.measured = m.str();
        return ok;
    });
}

// 6. Latency 1 reproduces the vanilla run bit for bit.
inline CriterionResult criterion_latency_one(const std::string& chain_path) {
    using namespace acceptance_detail;
    return timed_criterion(6, "L=1 degeneracy", "bit-identical to the vanilla run", 10.0,
                           [&](CriterionResult& r) {
        const Mdp mdp = load_mdp(chain_path);
        PolicyConfig cfg;
        cfg.exploration_c = 0.5;
        cfg.schedule = LearningSchedule::robbins_monro(1.0);
        cfg.rng_seed = 11;
        RunOptions opt;
        opt.steps = 2000;
        opt.record_trace = true;
        opt.snapshot_every = 0;

        MdpEnv env_a(mdp, 0), env_b(mdp, 0);
        const RunResult vanilla = run_vanilla_sarsa(env_a, cfg, opt);
        const RunResult blocking = run_blocking_sarsa(env_b, cfg, 1, opt);

        if (vanilla.q.values() != blocking.q.values()) {
            r.measured = "final tables differ";
            return false;
        }
        if (blocking.rejected_count != 0) {
            r.measured = "L=1 rejected " + std::to_string(blocking.rejected_count) + " updates";
            return false;
        }
        for (int s = 0; s < vanilla.q.num_states(); ++s)
            for (int a = 0; a < vanilla.q.num_actions(); ++a)
                if (vanilla.q.n(s, a) != blocking.q.n(s, a) ||
                    vanilla.q.m(s, a) != blocking.q.m(s, a)) {
                    r.measured = "visit/revision counters differ at (" + std::to_string(s) + "," +
                                 std::to_string(a) + ")";
                    return false;
                }
        for (std::size_t i = 0; i < vanilla.trace.size(); ++i) {
            const StepTraceRow& x = vanilla.trace[i];
            const StepTraceRow& y = blocking.trace[i];
            if (x.s != y.s || x.a != y.a || x.reward != y.reward || x.q_value != y.q_value) {
                r.measured = "traces diverge at step " + std::to_string(x.step);
                return false;
            }
        }
        r.measured = "2000 steps: identical trajectory, values, and visit counts";
        return true;
    });
}

// 7. HE unit properties on the table1 profile.
inline CriterionResult criterion_he_units(const KeySet& table1) {
    using namespace acceptance_detail;
    return timed_criterion(7, "HE unit properties (table1)",
                           "roundtrip < 1e-5 on [-10,10]; add/mul < 1e-5; NTT exact; "
                           "serialization bit-exact; <= 120 s",
                           120.0, [&](CriterionResult& r) {
        const ContextPtr& ctx = table1.ctx;
        Rng rng(1007);
        Rng enc_rng = rng.split("enc");

        // encode/decode roundtrip
        double roundtrip_err = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> vals(ctx->slot_count());
            for (auto& v : vals) v = -10.0 + 20.0 * rng.next_double();
            const std::vector<double> back = decode(encode(ctx, vals, ctx->params().scale));
            for (std::size_t i = 0; i < vals.size(); ++i)
                roundtrip_err = std::max(roundtrip_err, std::fabs(back[i] - vals[i]));
        }

        // add and mul homomorphism
        std::vector<double> a(ctx->slot_count()), b(ctx->slot_count());
        for (auto& v : a) v = -3.0 + 6.0 * rng.next_double();
        for (auto& v : b) v = -3.0 + 6.0 * rng.next_double();
        const Ciphertext ca = encrypt(table1, encode(ctx, a, ctx->params().scale), enc_rng);
        const Ciphertext cb = encrypt(table1, encode(ctx, b, ctx->params().scale), enc_rng);
        double add_err = 0.0, mul_err = 0.0;
        const std::vector<double> sum = decode(decrypt(table1, he_add(ca, cb)));
        const std::vector<double> prod =
            decode(decrypt(table1, rescale(relinearize(he_mul(ca, cb), table1.relin))));
        for (std::size_t i = 0; i < a.size(); ++i) {
            add_err = std::max(add_err, std::fabs(sum[i] - (a[i] + b[i])));
            mul_err = std::max(mul_err, std::fabs(prod[i] - a[i] * b[i]));
        }

        // negacyclic NTT vs schoolbook, N = 4..64
        bool ntt_ok = true;
        for (std::size_t n = 4; n <= 64 && ntt_ok; n *= 2) {
            const uint64_t q = find_ntt_primes(uint64_t{1} << 30, 2 * n, 1)[0];
            NttTables tables(q, n);
            for (int rep = 0; rep < 4 && ntt_ok; ++rep) {
                std::vector<uint64_t> x(n), y(n);
                for (auto& c : x) c = rng.next_below(q);
                for (auto& c : y) c = rng.next_below(q);
                ntt_ok = ntt_multiply(tables, x, y) == schoolbook_negacyclic(x, y, q);
            }
        }

        // serialization roundtrip, ciphertext and relin key
        const std::vector<uint8_t> ct_bytes = serialize_ciphertext(ca);
        const bool ct_ok =
            serialize_ciphertext(deserialize_ciphertext(ctx, ct_bytes)) == ct_bytes;
        const std::vector<uint8_t> rk_bytes = serialize_relin_key(ctx, table1.relin);
        const bool rk_ok =
            serialize_relin_key(ctx, deserialize_relin_key(ctx, rk_bytes)) == rk_bytes;

        r.measured = "roundtrip " + fmt("%.2g", roundtrip_err) + ", add " + fmt("%.2g", add_err) +
                     ", mul " + fmt("%.2g", mul_err) + ", NTT " + (ntt_ok ? "exact" : "MISMATCH") +
                     ", serialization " + (ct_ok && rk_ok ? "bit-exact" : "MISMATCH");
        return roundtrip_err < 1e-5 && add_err < 1e-5 && mul_err < 1e-5 && ntt_ok && ct_ok && rk_ok;
    });
}

// 8. Wire results equal in-process results at the ciphertext level, and the
// cloud never holds plaintext or key bytes.
inline CriterionResult criterion_transport(const KeySet& small) {
    using namespace acceptance_detail;
    return timed_criterion(8, "transport transparency (loopback)",
                           "ciphertext-identical to in-process; zero sentinel bytes cloud-side; "
                           "<= 60 s",
                           60.0, [&](CriterionResult& r) {
        const double kSentinels[5] = {3.1415926535897931, -2.7182818284590451, 1.6180339887498949,
                                      0.61803398874989479, 0.57721566490153287};

        CloudService cloud(small.ctx, /*capture_traffic=*/true);
        TcpListener listener(0);
        std::thread server([&] { cloud.serve(listener, 1); });

        bool bytes_equal = true;
        {
            ClientSession session(tcp_connect("127.0.0.1", listener.port()), small, 1008);
            session.upload_relin_key();
            Rng rng(1008);
            for (int round = 0; round < 3; ++round) {
                std::vector<TransitionRecord> records(8);
                for (std::size_t i = 0; i < records.size(); ++i) {
                    TransitionRecord& z = records[i];
                    if (round == 0) {
                        z.q_sa = kSentinels[0];
                        z.reward = kSentinels[1];
                        z.q_next = kSentinels[2];
                        z.alpha = kSentinels[3];
                        z.gamma = kSentinels[4];
                    } else {
                        z.q_sa = -2.0 + 4.0 * rng.next_double();
                        z.reward = -1.0 + 2.0 * rng.next_double();
                        z.q_next = -2.0 + 4.0 * rng.next_double();
                        z.alpha = 1.0 - rng.next_double() * (1.0 - 1e-6);
                        z.gamma = rng.next_double();
                    }
                    z.s = static_cast<int>(i);
                }
                OpCounter scratch;
                const EncryptedBatch enc =
                    pack_and_encrypt(small, pack_records(records), rng, scratch);
                const Ciphertext local = evaluate_update(enc, small.relin, scratch);
                const Ciphertext remote = session.evaluate_remote(enc);
                bytes_equal =
                    bytes_equal && serialize_ciphertext(local) == serialize_ciphertext(remote);
            }
            session.bye();
        }
        server.join();

        const std::vector<uint8_t> seen = cloud.captured_bytes();
        std::size_t sentinel_hits = 0;
        for (double s : kSentinels) {
            uint8_t pattern[8];
            std::memcpy(pattern, &s, 8);
            if (std::search(seen.begin(), seen.end(), pattern, pattern + 8) != seen.end())
                ++sentinel_hits;
        }
        const std::size_t probe_words = std::min<std::size_t>(64, small.secret.n);
        const uint8_t* secret_bytes = reinterpret_cast<const uint8_t*>(small.secret.row(0));
        const bool secret_leaked =
            std::search(seen.begin(), seen.end(), secret_bytes,
                        secret_bytes + probe_words * sizeof(uint64_t)) != seen.end();

        r.measured = std::string("3/3 batches ciphertext-") +
                     (bytes_equal ? "identical" : "DIFFERENT") + "; " +
                     std::to_string(sentinel_hits) + " sentinel hits, secret key " +
                     (secret_leaked ? "FOUND" : "absent") + " in " + std::to_string(seen.size()) +
                     " captured bytes";
        return bytes_equal && sentinel_hits == 0 && !secret_leaked;
    });
}

// 9. Encrypted cart-pole training beats the seeded random baseline tenfold.
inline CriterionResult criterion_cartpole(const KeySet& small, std::ostream* out) {
    using namespace acceptance_detail;
    return timed_criterion(9, "encrypted cart-pole learning",
                           "greedy mean episode length >= 10x random baseline; <= 600 s",
                           600.0, [&](CriterionResult& r) {
        const uint64_t seed = 9;
        const std::size_t slots = small.ctx->slot_count();

        CloudService cloud(small.ctx);
        auto [client_end, server_end] = make_duplex_pair();
        StreamPtr server_stream = server_end;
        std::thread worker([&cloud, server_stream] {
            cloud.serve_connection(*server_stream);
            server_stream->close();
        });

        double ratio = 0.0, baseline = 0.0, greedy = 0.0, client_share = 0.0;
        {
            ClientSession session(client_end, small, seed);
            session.upload_relin_key();

            PolicyConfig cfg;
            cfg.exploration_c = 0.5;
            cfg.schedule = LearningSchedule::constant(0.1);
            cfg.rng_seed = seed;

            // optimistic start at the value ceiling 1/(1-gamma); greedy keeps
            // alternating actions while the inflated values decay
            BatchSession<CartPoleEnv> sess(CartPoleEnv(0.99), cfg);
            for (int s = 0; s < kCartPoleStates; ++s)
                for (int a = 0; a < 2; ++a) sess.q().set_value(s, a, 100.0);

            // 500 collection rounds of 1000 transitions against a frozen
            // table; each round rides the wire in slot-sized chunks
            for (int b = 0; b < 500; ++b) {
                const std::vector<TransitionRecord> records = sess.collect(1000);
                std::vector<double> results;
                results.reserve(records.size());
                for (std::size_t off = 0; off < records.size(); off += slots) {
                    const std::size_t n = std::min(slots, records.size() - off);
                    const std::vector<double> part = session.upload_batch(
                        std::span<const TransitionRecord>(records.data() + off, n));
                    results.insert(results.end(), part.begin(), part.end());
                }
                sess.apply(records, results);
            }
            session.bye();

            QTable zero(kCartPoleStates, 2);
            Rng base_rng(seed ^ 0xabcdef);
            baseline = mean_episode_length(zero, EpisodePolicy::random, base_rng, 100, 10000);
            Rng eval_rng(seed ^ 0x5555);
            greedy = mean_episode_length(sess.q(), EpisodePolicy::greedy, eval_rng, 100, 10000);
            ratio = greedy / baseline;

            OpCounter combined = session.client_ops();
            combined += session.cloud_ops();
            client_share = 100.0 * session.client_ops().total_ms() / combined.total_ms();
            if (out) {
                *out << "\nper-batch operation report over " << session.batches_sent()
                     << " wire batches (reported, not gated):\n";
                write_op_report(*out, combined, session.batches_sent());
                *out << "client-side share of homomorphic wall time (encode/encrypt/decrypt/"
                        "decode): "
                     << fmt("%.1f", client_share) << "%\n\n";
            }
        }
        worker.join();

        r.measured = "greedy " + fmt("%.1f", greedy) + " vs baseline " + fmt("%.1f", baseline) +
                     " (" + fmt("%.1f", ratio) + "x); client share " +
                     fmt("%.1f", client_share) + "% (reported)";
        return ratio >= 10.0;
    });
}

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt) {
    std::ostream* out = opt.out;
    const auto note = [&](const char* msg) {
        if (out) *out << msg << std::endl;
    };
    const auto selected = [&](int n) {
        return opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), n) != opt.only.end();
    };

    // key material is expensive; generate only what the selection touches
    std::optional<KeySet> big_keys, small_keys;
    const auto big = [&]() -> const KeySet& {
        if (!big_keys) {
            note("generating table1 keys...");
            big_keys = acceptance_detail::seeded_keys(make_context(params_table1()), 20260816);
        }
        return *big_keys;
    };
    const auto small = [&]() -> const KeySet& {
        if (!small_keys) {
            note("generating test-small keys...");
            small_keys = acceptance_detail::seeded_keys(make_context(params_test_small()), 20260816);
        }
        return *small_keys;
    };

    const std::string chain = opt.data_dir + "/chain5.mdp";
    const std::string golden = opt.data_dir + "/blocking_golden.txt";

    std::vector<CriterionResult> results;
    const auto run = [&](CriterionResult r) {
        if (out)
            *out << (r.pass ? "[PASS] " : "[FAIL] ") << r.number << ". " << r.name << ": "
                 << r.measured << " (bound: " << r.bound << ") [" << acceptance_detail::fmt("%.2f", r.seconds)
                 << " s]" << std::endl;
        results.push_back(std::move(r));
    };

    if (selected(1)) run(criterion_op_counts(big(), small()));
    if (selected(2)) run(criterion_precision(big()));
    if (selected(3)) run(criterion_circuit_oracle(small()));
    if (selected(4)) run(criterion_golden_trace(golden));
    if (selected(5)) run(criterion_chain_convergence(chain));
    if (selected(6)) run(criterion_latency_one(chain));
    if (selected(7)) run(criterion_he_units(big()));
    if (selected(8)) run(criterion_transport(small()));
    if (selected(9)) run(criterion_cartpole(small(), out));
    return results;
}

inline bool all_passed(const std::vector<CriterionResult>& results) {
    for (const CriterionResult& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

} // namespace eqrl

#endif
