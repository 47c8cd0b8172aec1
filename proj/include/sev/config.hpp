#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sev/estimates.hpp"
#include "sev/operators.hpp"
#include "sev/triple.hpp"

namespace sev {

/// Parsed experiment description. See docs in the repository README for the
/// JSON schema; parse_config validates the invariants (integer step count,
/// strictly decreasing lambdas, at least one path).
struct ExperimentConfig {
    std::string name = "experiment";
    std::shared_ptr<GelfandTriple> triple;
    OperatorPair pair;
    double T = 1.0;
    double dt = 1.0 / 256.0;
    std::vector<double> lambdas;
    int paths = 1;
    std::uint64_t seed = 1;
    int jobs = 1;
    Scheme scheme = Scheme::ExplicitEM;
    SolveOptions solve{};
    Vec X0;
    std::string outputs = "out";

    // estimate-job knobs
    double apriori_lambda = 0.5;
    double convergence_target_ratio = 0.0; // <= 0: monotone check only
    bool measure_slack = true;
    std::optional<Vec> lipschitz_X0_b;     // second initial datum; default X0 + shift
    int assumption_samples = 200;
    int hemicontinuity_samples = 32;

    std::size_t steps() const;
    McRunConfig mc() const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<memory>");

/// FNV-1a hash of the raw config bytes, recorded in the run manifest.
std::uint64_t fnv1a(const std::string& bytes);

} // namespace sev
