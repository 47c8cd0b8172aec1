#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sev/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    int jobs = -1;
    std::uint64_t seed = 0;
    bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--jobs", args.jobs, "worker threads; 1 gives the canonical bitwise output");
    cmd->add_option("--seed-override", args.seed, "replace the config seed")
        ->each([&args](const std::string&) { args.has_seed = true; });
}

int dispatch(const std::string& sub, const CommonArgs& args) {
    std::string bytes;
    {
        std::ifstream in(args.config_path);
        if (!in) {
            std::cerr << "error: cannot open config " << args.config_path << "\n";
            return sev::kExitUsage;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        bytes = ss.str();
    }
    sev::ExperimentConfig cfg;
    try {
        cfg = sev::parse_config_text(bytes, args.config_path);
    } catch (const sev::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sev::kExitUsage;
    }
    sev::RunOverrides ov;
    ov.out_dir = args.out_dir;
    ov.jobs = args.jobs;
    ov.seed = args.seed;
    ov.has_seed_override = args.has_seed;

    try {
        int rc = sev::kExitUsage;
        if (sub == "check-assumptions") rc = sev::run_check_assumptions(cfg, bytes, ov);
        if (sub == "solve") rc = sev::run_solve(cfg, bytes, ov);
        if (sub == "converge") rc = sev::run_converge(cfg, bytes, ov);
        if (sub == "estimates") rc = sev::run_estimates(cfg, bytes, ov);
        const std::string dir = ov.out_dir.empty() ? cfg.outputs : ov.out_dir;
        std::ifstream summary(dir + "/summary.txt");
        if (summary) std::cout << summary.rdbuf();
        if (rc == sev::kExitNumerical)
            std::cerr << "error: numerical failure (blow-up or solver non-convergence)\n";
        return rc;
    } catch (const sev::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sev::kExitUsage;
    } catch (const sev::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sev::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sev::kExitNumerical;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resolvent-regularized stochastic evolution equations: experiment runner"};
    app.require_subcommand(1);

    CommonArgs check_args, solve_args, converge_args, estimates_args;
    auto* check = app.add_subcommand("check-assumptions",
                                     "sampled margins of the structural conditions on (A, B)");
    add_common(check, check_args);
    auto* solve = app.add_subcommand("solve", "integrate one path and write CSV/binary artifacts");
    add_common(solve, solve_args);
    auto* converge = app.add_subcommand("converge", "coupled-noise lambda sweep against the reference");
    add_common(converge, converge_args);
    auto* estimates = app.add_subcommand("estimates",
                                         "a priori bound, family bounds, Lipschitz dependence");
    add_common(estimates, estimates_args);
    auto* list = app.add_subcommand("list-instances", "names and parameters of shipped operators");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : sev::kExitUsage;
    }

    if (list->parsed()) {
        std::cout << sev::list_instances_text();
        return sev::kExitPass;
    }
    if (check->parsed()) return dispatch("check-assumptions", check_args);
    if (solve->parsed()) return dispatch("solve", solve_args);
    if (converge->parsed()) return dispatch("converge", converge_args);
    if (estimates->parsed()) return dispatch("estimates", estimates_args);
    return sev::kExitUsage;
}
