#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "btnet/bt_weight.hpp"

namespace btnet::verify {

struct SuiteResult {
    std::string name;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::vector<std::string> messages;  // one per failure, plus info lines
    bool ok() const { return failures == 0; }
};

/// bt_forward / tt_forward against dense matmul with the reconstructed
/// matrix over random seeds. `fault_target`, when non-null, gets one core
/// scalar perturbed after the reference matrix is taken, so the suite
/// must report a failure (fault-injection self-test).
SuiteResult oracle_equivalence(std::size_t seeds, BtWeight* fault_target = nullptr);

/// Central finite differences on every parameter and the input of every
/// layer kind, on small instances.
SuiteResult gradient_checks(std::uint64_t seed = 7);

/// BT unfolding rank <= R_C R_T^min(k, N-k) and TT rank <= r over random
/// weights; reports the max observed rank per split point.
SuiteResult rank_bounds(std::size_t seeds);

/// Parameter-count reproduction for the mnist/cifar10/imagenet presets,
/// formula vs. instantiated weights.
SuiteResult table_reproduction();

struct Report {
    std::vector<SuiteResult> suites;
    bool ok() const {
        for (const auto& s : suites)
            if (!s.ok()) return false;
        return true;
    }
};

Report run_all(std::size_t seeds, bool inject_fault);

}  // namespace btnet::verify
