#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cocycle/baseflow.hpp"
#include "cocycle/config.hpp"
#include "cocycle/kinetic.hpp"

namespace cocycle {

inline constexpr const char* kToolVersion = "cocycle-lab 1.0.0";

// Constructs the configured flow / generator (shared by the runner and the
// self-test battery).
std::shared_ptr<const BaseFlow> build_flow(const ExperimentConfig& cfg);
KineticGenerator build_generator(const ExperimentConfig& cfg);

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> artifacts;  // files written, in creation order
};

// Executes one experiment: writes <prefix>_<operation>.csv (plus any
// secondary artifacts) and <prefix>_manifest, prints the artifact summary
// table to `out`, and reports errors on `err`.  Throws the library's
// exceptions on failure; the CLI maps them to exit codes (1 validation,
// 2 numerical, 3 infeasible).
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& out,
                         std::ostream& err);

// The verify operation's invariant battery, exposed for direct reuse in
// tests: returns (name, passed) per check.
std::vector<std::pair<std::string, bool>> verify_battery(
    const ExperimentConfig& cfg);

}  // namespace cocycle
