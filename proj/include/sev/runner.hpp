#pragma once

#include <string>
#include <vector>

#include "sev/config.hpp"

namespace sev {

/// Exit codes shared by the library runner and the CLI.
enum ExitCode : int {
    kExitPass = 0,
    kExitCheckFailed = 1,
    kExitUsage = 2,
    kExitNumerical = 3,
};

struct RunOverrides {
    std::string out_dir;             // empty: use config value
    int jobs = -1;                   // <0: use config value
    std::uint64_t seed = 0;
    bool has_seed_override = false;
};

/// Each job writes its CSV artifacts plus manifest.json and summary.txt into
/// the output directory and returns an exit code.
int run_check_assumptions(const ExperimentConfig& cfg, const std::string& config_bytes,
                          const RunOverrides& ov = {});
int run_solve(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov = {});
int run_converge(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov = {});
int run_estimates(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov = {});

std::string list_instances_text();

/// Format doubles for CSV output: shortest round-trippable decimal.
std::string csv_double(double v);

} // namespace sev
