// Command-line front end. Exit codes: 0 ok, 1 usage, 2 acceptance failure,
// 3 runtime fault.

#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eqrl/cli_commands.hpp"

#ifndef EQRL_DATA_DIR
#error "EQRL_DATA_DIR must point at the data directory"
#endif

int main(int argc, char** argv) {
    eqrl::RunConfig cfg;
    cfg.data_dir = EQRL_DATA_DIR;
    std::string config_path;
    std::vector<std::string> criteria;

    CLI::App app{"tabular SARSA with encrypted cloud updates: training runs, benchmarks, and "
                 "acceptance checks"};
    app.require_subcommand(1);

    // config file fills whatever the flags leave untouched; EQRL_SEED wins over both
    auto* o_config = app.add_option("--config", config_path, "key = value config file");
    auto* o_seed = app.add_option("--seed", cfg.seed, "rng seed");
    auto* o_steps = app.add_option("--steps", cfg.steps, "environment steps (train-plain/-blocking)");
    auto* o_latency = app.add_option("--latency", cfg.latency, "update delay in steps (train-blocking)");
    auto* o_batch = app.add_option("--batch", cfg.batch, "records per encrypted batch (train-encrypted)");
    auto* o_batches = app.add_option("--batches", cfg.batches, "encrypted batches to run");
    auto* o_reps = app.add_option("--reps", cfg.reps, "bench repetitions, at least 100");
    auto* o_snap = app.add_option("--snapshot-every", cfg.snapshot_every,
                                  "steps between learning-curve rows (0 = none)");
    auto* o_profile = app.add_option("--profile", cfg.profile, "encryption profile: table1 or test-small");
    auto* o_mdp = app.add_option("--mdp", cfg.mdp, "'cartpole' or a .mdp file path");
    auto* o_out = app.add_option("--out", cfg.out_dir, "output directory for artifacts");
    auto* o_data = app.add_option("--data", cfg.data_dir, "directory holding chain5.mdp and the golden trace");

    auto* t_plain = app.add_subcommand("train-plain", "tabular SARSA with immediate updates");
    auto* t_block = app.add_subcommand("train-blocking", "delayed updates with blocking states");
    auto* t_enc = app.add_subcommand("train-encrypted", "batched updates through the encrypted cloud service");
    auto* bench = app.add_subcommand("bench-he", "per-operation timing of one encrypted batch update");
    auto* verify = app.add_subcommand("verify", "run the acceptance criteria, one verdict line each");
    verify->add_option("criteria", criteria, "subset to run, by number 1-9 or name; default all");
    for (CLI::App* sub : {t_plain, t_block, t_enc, bench, verify}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e); // prints the message or the help text
        return rc == 0 ? 0 : 1;
    }

    try {
        std::set<std::string> from_flags;
        const auto mark = [&](const CLI::Option* o, const char* key) {
            if (o->count() > 0) from_flags.insert(key);
        };
        mark(o_seed, "seed");
        mark(o_steps, "steps");
        mark(o_latency, "latency");
        mark(o_batch, "batch");
        mark(o_batches, "batches");
        mark(o_reps, "reps");
        mark(o_snap, "snapshot_every");
        mark(o_profile, "profile");
        mark(o_mdp, "mdp");
        mark(o_out, "out_dir");
        mark(o_data, "data_dir");
        if (o_config->count() > 0)
            eqrl::apply_file_config(cfg, eqrl::parse_config_file(config_path), from_flags);
        eqrl::apply_env_overrides(cfg);

        if (app.got_subcommand(t_plain)) return eqrl::cmd_train_plain(cfg, std::cout);
        if (app.got_subcommand(t_block)) return eqrl::cmd_train_blocking(cfg, std::cout);
        if (app.got_subcommand(t_enc)) return eqrl::cmd_train_encrypted(cfg, std::cout);
        if (app.got_subcommand(bench)) return eqrl::cmd_bench_he(cfg, std::cout);
        if (app.got_subcommand(verify)) return eqrl::cmd_verify(cfg, criteria, std::cout);
        return 1;
    } catch (const eqrl::Fault& f) {
        std::cerr << "fault: " << f.what() << "\n";
        return f.code() == eqrl::FaultCode::bad_argument ? 1 : 3;
    } catch (const std::exception& e) {
        std::cerr << "fault: " << e.what() << "\n";
        return 3;
    }
}
