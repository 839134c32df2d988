// Acceptance gate: runs every criterion and prints one verdict line each.
// Exit 0 when all pass, 2 otherwise.

#include <iostream>
#include <string>

#include "eqrl/acceptance.hpp"

#ifndef EQRL_DATA_DIR
#error "EQRL_DATA_DIR must point at the data directory"
#endif

int main(int argc, char** argv) {
    eqrl::AcceptanceOptions opt;
    opt.data_dir = (argc > 1) ? argv[1] : EQRL_DATA_DIR;
    opt.out = &std::cout;

    std::cout << "acceptance run, data dir: " << opt.data_dir << "\n";
    const auto results = eqrl::run_acceptance(opt);

    std::size_t passed = 0;
    for (const auto& r : results) passed += r.pass ? 1 : 0;
    std::cout << "\n" << passed << "/" << results.size() << " criteria passed\n";
    return eqrl::all_passed(results) ? 0 : 2;
}
