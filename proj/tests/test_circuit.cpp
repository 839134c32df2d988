// The encrypted batch update circuit: packing, the 4-multiply/3-addition
// evaluation, unpacking, operation accounting, and precision against the
// plaintext sarsa_update oracle.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "eqrl/circuit.hpp"

using namespace eqrl;

namespace {

struct Fixture {
    ContextPtr ctx;
    KeySet keys;
    Rng rng;

    explicit Fixture(uint64_t seed = 42)
        : ctx(make_context(params_test_small())), keys(make_keys(ctx, seed)), rng(seed) {}

    static KeySet make_keys(const ContextPtr& ctx, uint64_t seed) {
        Rng key_rng(seed ^ 0x9e3779b97f4a7c15ull);
        return keygen(ctx, key_rng);
    }
};

PackedBatch replicated_batch(std::size_t L, double q, double r, double q_next, double alpha, double gamma) {
    PackedBatch b;
    b.q.assign(L, q);
    b.r.assign(L, r);
    b.q_next.assign(L, q_next);
    b.alpha.assign(L, alpha);
    b.gamma.assign(L, gamma);
    return b;
}

std::vector<double> oracle(const PackedBatch& b) {
    std::vector<double> out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        out[i] = sarsa_update(b.q[i], b.r[i], b.q_next[i], b.alpha[i], b.gamma[i]);
    return out;
}

constexpr std::array<uint64_t, 8> kPackCounts = {5, 5, 0, 0, 0, 0, 0, 0};
constexpr std::array<uint64_t, 8> kEvalCounts = {0, 0, 4, 4, 4, 3, 0, 0};
constexpr std::array<uint64_t, 8> kUnpackCounts = {0, 0, 0, 0, 0, 0, 1, 1};
constexpr std::array<uint64_t, 8> kBatchCounts = {5, 5, 4, 4, 4, 3, 1, 1};

} // namespace

TEST_CASE("one batch produces exactly the expected operation multiset") {
    Fixture fx;
    const PackedBatch batch = replicated_batch(8, 1.0, 1.0, 2.0, 0.5, 0.9);

    OpCounter pack_ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, pack_ops);
    REQUIRE(pack_ops.count == kPackCounts);

    OpCounter eval_ops;
    const Ciphertext out = evaluate_update(enc, fx.keys.relin, eval_ops);
    REQUIRE(eval_ops.count == kEvalCounts);

    OpCounter unpack_ops;
    const auto values = decrypt_and_unpack(fx.keys, out, batch.size(), unpack_ops);
    REQUIRE(unpack_ops.count == kUnpackCounts);

    OpCounter total = pack_ops;
    total += eval_ops;
    total += unpack_ops;
    REQUIRE(total.count == kBatchCounts);
    REQUIRE(total.total_count() == 27);
    REQUIRE(total.total_ms() > 0.0);

    // the worked example: (1-0.5)*1 + 0.5*(1 + 0.9*2) = 1.9
    REQUIRE(values.size() == 8);
    for (double v : values) REQUIRE(std::fabs(v - 1.9) < 1e-3);
}

TEST_CASE("circuit output is two levels deep at the nominal scale") {
    Fixture fx;
    const PackedBatch batch = replicated_batch(4, -3.0, 0.5, 7.0, 0.25, 0.75);
    OpCounter ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);
    REQUIRE(enc.q.level == 0);
    REQUIRE(enc.q.scale == fx.ctx->params().scale);

    const Ciphertext out = evaluate_update(enc, fx.keys.relin, ops);
    REQUIRE(out.level == 2);
    REQUIRE(out.size() == 2);
    REQUIRE(out.scale == fx.ctx->params().scale); // exact, by scale-aligned packing
}

TEST_CASE("zero step size passes Q through") {
    Fixture fx;
    PackedBatch batch = replicated_batch(16, 0.0, 0.8, -55.0, 0.0, 0.9);
    for (std::size_t i = 0; i < batch.size(); ++i) batch.q[i] = -40.0 + 5.0 * static_cast<double>(i);
    OpCounter ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);
    const auto values = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), batch.size(), ops);
    for (std::size_t i = 0; i < batch.size(); ++i) REQUIRE(std::fabs(values[i] - batch.q[i]) < 1e-4);
}

TEST_CASE("full step size with zero discount overwrites with the reward") {
    Fixture fx;
    PackedBatch batch = replicated_batch(32, 0.0, 0.0, 0.0, 1.0, 0.0);
    Rng vals(7);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch.q[i] = -2.0 + 4.0 * vals.next_double();
        batch.q_next[i] = -2.0 + 4.0 * vals.next_double();
        batch.r[i] = -1.0 + 2.0 * vals.next_double();
    }
    OpCounter ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);
    const auto values = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), batch.size(), ops);
    for (std::size_t i = 0; i < batch.size(); ++i) REQUIRE(std::fabs(values[i] - batch.r[i]) < 1e-5);
}

TEST_CASE("zero batch comes back as zeros plus noise") {
    Fixture fx;
    const PackedBatch batch = replicated_batch(8, 0.0, 0.0, 0.0, 0.0, 0.0);
    OpCounter ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);
    const auto values = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), batch.size(), ops);
    for (double v : values) REQUIRE(std::fabs(v) < 1e-5);
}

TEST_CASE("single record occupies slot zero and pads with zeros") {
    Fixture fx;
    TransitionRecord z;
    z.q_sa = 5.0;
    z.reward = -0.25;
    z.q_next = 3.0;
    z.alpha = 0.5;
    z.gamma = 0.5;
    const std::vector<TransitionRecord> records = {z};
    const PackedBatch batch = pack_records(records);
    REQUIRE(batch.size() == 1);
    REQUIRE(batch.origin.size() == 1);

    OpCounter ops;
    const EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);
    // decrypt the packed operand directly: slot 0 carries the value, the rest stay near zero
    OpCounter scratch;
    const auto q_slots = decrypt_and_unpack(fx.keys, enc.q, fx.ctx->slot_count(), scratch);
    REQUIRE(std::fabs(q_slots[0] - 5.0) < 1e-5);
    for (std::size_t i = 1; i < q_slots.size(); ++i) REQUIRE(std::fabs(q_slots[i]) < 1e-5);

    const auto values = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), 1, ops);
    REQUIRE(values.size() == 1);
    REQUIRE(std::fabs(values[0] - sarsa_update(5.0, -0.25, 3.0, 0.5, 0.5)) < 1e-4);
}

TEST_CASE("terminal records bootstrap from zero in the packed batch") {
    TransitionRecord z;
    z.q_sa = 2.0;
    z.reward = 1.0;
    z.q_next = 99.0; // stale successor value, must be ignored
    z.alpha = 1.0;
    z.gamma = 0.5;
    z.terminal = true;
    const std::vector<TransitionRecord> records = {z};
    const PackedBatch batch = pack_records(records);
    REQUIRE(batch.q_next[0] == 0.0);
}

TEST_CASE("packing validates shape and slot capacity") {
    Fixture fx;
    OpCounter ops;

    PackedBatch empty;
    REQUIRE_THROWS_AS(pack_and_encrypt(fx.keys, empty, fx.rng, ops), Fault);

    PackedBatch too_big = replicated_batch(fx.ctx->slot_count() + 1, 0, 0, 0, 0.5, 0.5);
    REQUIRE_THROWS_AS(pack_and_encrypt(fx.keys, too_big, fx.rng, ops), Fault);

    PackedBatch ragged = replicated_batch(4, 0, 0, 0, 0.5, 0.5);
    ragged.gamma.pop_back();
    REQUIRE_THROWS_AS(pack_and_encrypt(fx.keys, ragged, fx.rng, ops), Fault);

    PackedBatch nan_batch = replicated_batch(4, 0, 0, 0, 0.5, 0.5);
    nan_batch.r[2] = std::nan("");
    REQUIRE_THROWS_AS(pack_and_encrypt(fx.keys, nan_batch, fx.rng, ops), Fault);

    REQUIRE(ops.count == std::array<uint64_t, 8>{}); // nothing was counted
}

TEST_CASE("evaluate refuses misaligned operands and names them") {
    Fixture fx;
    const PackedBatch batch = replicated_batch(4, 1.0, 0.5, 2.0, 0.5, 0.5);
    OpCounter ops;
    EncryptedBatch enc = pack_and_encrypt(fx.keys, batch, fx.rng, ops);

    SECTION("operand at the wrong level") {
        enc.q_next = mod_switch_to(enc.q_next, 1);
        try {
            evaluate_update(enc, fx.keys.relin, ops);
            FAIL("expected a fault");
        } catch (const Fault& f) {
            REQUIRE(std::string(f.what()).find("q_next") != std::string::npos);
        }
    }
    SECTION("operand at the wrong scale") {
        enc.alpha.scale = fx.ctx->params().scale * 2.0;
        try {
            evaluate_update(enc, fx.keys.relin, ops);
            FAIL("expected a fault");
        } catch (const Fault& f) {
            REQUIRE(std::string(f.what()).find("alpha") != std::string::npos);
        }
    }
    SECTION("three-component operand") {
        enc.r = he_mul(enc.r, enc.gamma);
        try {
            evaluate_update(enc, fx.keys.relin, ops);
            FAIL("expected a fault");
        } catch (const Fault& f) {
            REQUIRE(std::string(f.what()).find("r") != std::string::npos);
        }
    }
}

TEST_CASE("circuit matches the plaintext oracle over random batches") {
    Fixture fx(2026);
    Rng draw(99);
    const std::size_t L = 64;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        PackedBatch b = replicated_batch(L, 0, 0, 0, 0.5, 0.5);
        for (std::size_t i = 0; i < L; ++i) {
            b.q[i] = -100.0 + 200.0 * draw.next_double();
            b.q_next[i] = -100.0 + 200.0 * draw.next_double();
            b.r[i] = -1.0 + 2.0 * draw.next_double();
            b.alpha[i] = 1.0 - draw.next_double() * (1.0 - 1e-6);
            b.gamma[i] = draw.next_double();
        }
        OpCounter ops;
        const EncryptedBatch enc = pack_and_encrypt(fx.keys, b, fx.rng, ops);
        const auto got = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), L, ops);
        const auto want = oracle(b);
        double norm = 1e-6;
        for (std::size_t i = 0; i < L; ++i)
            norm = std::max({norm, std::fabs(want[i]), std::fabs(b.q[i]), std::fabs(b.q_next[i])});
        for (std::size_t i = 0; i < L; ++i) worst = std::max(worst, std::fabs(got[i] - want[i]) / norm);
    }
    REQUIRE(worst <= 1e-4);
}

TEST_CASE("measure_precision reports both error metrics and full op counts") {
    Fixture fx(1234);
    Rng rng(5);
    const PrecisionReport rep = measure_precision(fx.keys, 10, 128, rng);
    REQUIRE(rep.batches == 10);
    REQUIRE(rep.batch_size == 128);
    REQUIRE(rep.max_batch_relative > 0.0);
    REQUIRE(rep.max_batch_relative <= 1e-4);
    REQUIRE(rep.max_slot_relative >= rep.max_batch_relative);
    REQUIRE(rep.max_absolute < 0.05); // sub-resolution on the [-100,100] box
    for (std::size_t i = 0; i < kOpTypeCount; ++i) REQUIRE(rep.ops.count[i] == 10 * kBatchCounts[i]);
}

TEST_CASE("ten composed batches stay within the linear error budget") {
    Fixture fx(777);
    Rng draw(31);
    const std::size_t L = 16;
    const int T = 10;
    // shadow plaintext Q trajectory alongside the encrypted one
    std::vector<double> q_plain(L), q_enc(L);
    for (std::size_t i = 0; i < L; ++i) q_plain[i] = q_enc[i] = -50.0 + 100.0 * draw.next_double();

    const double per_batch = 1e-4 * 100.0; // relative bound times the value box
    for (int t = 0; t < T; ++t) {
        PackedBatch b = replicated_batch(L, 0, 0, 0, 0.5, 0.5);
        b.q = q_enc;
        for (std::size_t i = 0; i < L; ++i) {
            b.q_next[i] = q_enc[(i + 1) % L];
            b.r[i] = -1.0 + 2.0 * draw.next_double();
            b.alpha[i] = 0.1 + 0.8 * draw.next_double();
            b.gamma[i] = 0.9 * draw.next_double();
        }
        OpCounter ops;
        const EncryptedBatch enc = pack_and_encrypt(fx.keys, b, fx.rng, ops);
        q_enc = decrypt_and_unpack(fx.keys, evaluate_update(enc, fx.keys.relin, ops), L, ops);
        for (std::size_t i = 0; i < L; ++i)
            q_plain[i] = sarsa_update(q_plain[i], b.r[i], b.q_next[i], b.alpha[i], b.gamma[i]);
        // note: the plaintext shadow consumes the encrypted q_next so the
        // comparison isolates per-batch circuit error accumulation
    }
    double max_dev = 0.0;
    for (std::size_t i = 0; i < L; ++i) max_dev = std::max(max_dev, std::fabs(q_enc[i] - q_plain[i]));
    REQUIRE(max_dev <= T * per_batch);
}

TEST_CASE("op report prints the fixed row order with percentages summing to 100") {
    OpCounter ops;
    ops.count = {10, 10, 8, 8, 8, 6, 2, 2};
    ops.ms = {1.0, 4.0, 8.0, 12.0, 1.0, 0.5, 2.0, 1.5};
    std::ostringstream out;
    write_op_report(out, ops, 2);
    const std::string text = out.str();

    std::istringstream lines(text);
    std::string header;
    std::getline(lines, header);
    REQUIRE(header == "Type\tNum\tTime (ms)\tPercent");

    const char* expect_rows[] = {"Encode", "Encrypt", "Multiply", "Relinearize", "Rescale",
                                 "Addition", "Decrypt", "Decode", "Total"};
    double pct_sum = 0.0;
    std::vector<double> nums;
    for (const char* want : expect_rows) {
        std::string line;
        REQUIRE(std::getline(lines, line));
        std::istringstream cells(line);
        std::string type;
        double num = 0.0, time = 0.0, pct = 0.0;
        cells >> type >> num >> time >> pct;
        REQUIRE(type == want);
        if (type != "Total") {
            pct_sum += pct;
            nums.push_back(num);
        }
    }
    REQUIRE(std::fabs(pct_sum - 100.0) <= 0.1);
    REQUIRE(nums == std::vector<double>{5, 5, 4, 4, 4, 3, 1, 1});
}
