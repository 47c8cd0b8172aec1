#include "sev/runner.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sev {

namespace {

namespace fs = std::filesystem;

struct RunContext {
    ExperimentConfig cfg;
    fs::path out;
    std::string config_bytes;
};

RunContext make_context(const ExperimentConfig& cfg, const std::string& config_bytes,
                        const RunOverrides& ov) {
    RunContext ctx{cfg, fs::path(ov.out_dir.empty() ? cfg.outputs : ov.out_dir), config_bytes};
    if (ov.jobs >= 0) ctx.cfg.jobs = std::max(1, ov.jobs);
    if (ov.has_seed_override) ctx.cfg.seed = ov.seed;
    fs::create_directories(ctx.out);
    return ctx;
}

void write_manifest(const RunContext& ctx, const std::string& job) {
    std::ofstream out(ctx.out / "manifest.json");
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(ctx.config_bytes)));
    const std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out << "{\n";
    out << "  \"job\": \"" << job << "\",\n";
    out << "  \"config_hash\": \"" << hash << "\",\n";
    out << "  \"seed\": " << ctx.cfg.seed << ",\n";
    out << "  \"jobs\": " << ctx.cfg.jobs << ",\n";
    out << "  \"version\": \"0.1.0\",\n";
    out << "  \"generated_at\": \"" << stamp << "\"\n"; // the only non-reproducible line
    out << "}\n";
}

struct SummaryWriter {
    std::ostringstream lines;
    int failures = 0;

    void add(const std::string& name, bool pass, const std::string& detail) {
        lines << (pass ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
        if (!pass) ++failures;
    }

    void flush(const fs::path& out_dir) {
        lines << (failures == 0 ? "ALL CHECKS PASSED\n"
                                : std::to_string(failures) + " CHECK(S) FAILED\n");
        std::ofstream out(out_dir / "summary.txt");
        out << lines.str();
    }
};

const char* kEstimateCsvHeader = "name,lambda,dt,t,n_paths,seed,lhs,rhs,margin,stderr,slack,pass\n";

void append_estimate_row(std::ostream& out, const EstimateReport& r) {
    out << r.name << ',' << csv_double(r.lambda) << ',' << csv_double(r.dt) << ',' << csv_double(r.t)
        << ',' << r.n_paths << ',' << r.seed << ',' << csv_double(r.lhs) << ',' << csv_double(r.rhs)
        << ',' << csv_double(r.margin) << ',' << csv_double(r.stderr_val) << ',' << csv_double(r.slack)
        << ',' << (r.pass ? 1 : 0) << "\n";
}

std::string describe(const EstimateReport& r) {
    std::ostringstream ss;
    ss << "lambda=" << csv_double(r.lambda) << " t=" << csv_double(r.t) << " lhs=" << csv_double(r.lhs)
       << " rhs=" << csv_double(r.rhs) << " margin=" << csv_double(r.margin)
       << " stderr=" << csv_double(r.stderr_val) << " slack=" << csv_double(r.slack);
    return ss.str();
}

} // namespace

std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string list_instances_text() {
    std::ostringstream ss;
    ss << "shipped operator instances:\n";
    for (const auto& info : operator_instances())
        ss << "  " << info.name << "  [" << info.kind << "]  params: " << info.params << "\n";
    return ss.str();
}

int run_check_assumptions(const ExperimentConfig& cfg, const std::string& config_bytes,
                          const RunOverrides& ov) {
    const RunContext ctx = make_context(cfg, config_bytes, ov);
    AssumptionCheckOptions opts;
    opts.horizon = ctx.cfg.T;
    const AssumptionReport rep = check_assumptions(ctx.cfg.pair, *ctx.cfg.triple,
                                                   ctx.cfg.assumption_samples, ctx.cfg.seed, opts);
    const HemicontinuityReport hemi = check_hemicontinuity(
        ctx.cfg.pair, *ctx.cfg.triple, ctx.cfg.hemicontinuity_samples, ctx.cfg.seed, ctx.cfg.T);

    {
        std::ofstream out(ctx.out / "assumptions.csv");
        out << "check,samples,seed,min_joint_margin,min_coercivity_margin,max_growth_violation,"
               "worst_hemicontinuity_jump,pass\n";
        out << "assumptions," << rep.samples << ',' << rep.seed << ','
            << csv_double(rep.min_joint_monotonicity_margin) << ','
            << csv_double(rep.min_coercivity_margin) << ',' << csv_double(rep.max_growth_violation)
            << ',' << csv_double(hemi.worst_jump) << ',' << ((rep.pass() && hemi.pass) ? 1 : 0) << "\n";
    }

    SummaryWriter summary;
    {
        std::ostringstream detail;
        detail << "joint=" << csv_double(rep.min_joint_monotonicity_margin)
               << " coercivity=" << csv_double(rep.min_coercivity_margin)
               << " growth_violation=" << csv_double(rep.max_growth_violation);
        summary.add("structural margins (monotonicity/coercivity/growth)", rep.pass(), detail.str());
    }
    {
        std::ostringstream detail;
        detail << "worst_jump=" << csv_double(hemi.worst_jump)
               << " worst_ratio=" << csv_double(hemi.worst_ratio);
        summary.add("hemicontinuity probe", hemi.pass, detail.str());
    }
    summary.flush(ctx.out);
    write_manifest(ctx, "check-assumptions");
    return summary.failures == 0 ? kExitPass : kExitCheckFailed;
}

int run_solve(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov) {
    const RunContext ctx = make_context(cfg, config_bytes, ov);
    const std::size_t N = ctx.cfg.steps();
    const NoisePath noise = NoisePath::sample(derive_path_seed(ctx.cfg.seed, 0), ctx.cfg.dt, N,
                                              ctx.cfg.pair.diffusion->modes());
    const double lambda = ctx.cfg.lambdas.empty() ? ctx.cfg.apriori_lambda : ctx.cfg.lambdas.front();

    PathSolution path;
    try {
        switch (ctx.cfg.scheme) {
            case Scheme::ExplicitEM:
                path = solve_regularized_em(ctx.cfg.pair, *ctx.cfg.triple, lambda, ctx.cfg.X0, noise,
                                            ctx.cfg.solve);
                break;
            case Scheme::PicardEM:
                path = solve_regularized_picard(ctx.cfg.pair, *ctx.cfg.triple, lambda, ctx.cfg.X0, noise,
                                                ctx.cfg.solve);
                break;
            case Scheme::ImplicitReference:
                path = solve_reference_implicit(ctx.cfg.pair, *ctx.cfg.triple, ctx.cfg.X0, noise,
                                                ctx.cfg.solve);
                break;
        }
    } catch (const BlowUpError&) {
        return kExitNumerical;
    } catch (const ConvergenceError&) {
        return kExitNumerical;
    } catch (const PicardDivergenceError&) {
        return kExitNumerical;
    }

    {
        std::ofstream out(ctx.out / "path.csv");
        path.to_csv(out);
    }
    path.write_binary((ctx.out / "path.bin").string());
    noise.write_binary((ctx.out / "noise.bin").string());

    SummaryWriter summary;
    std::ostringstream detail;
    detail << "scheme=" << to_string(path.scheme) << " lambda=" << csv_double(path.lambda)
           << " steps=" << path.steps();
    if (path.scheme == Scheme::PicardEM) detail << " picard_iterations=" << path.picard_iterations;
    summary.add("solve", true, detail.str());
    summary.flush(ctx.out);
    write_manifest(ctx, "solve");
    return kExitPass;
}

int run_converge(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov) {
    const RunContext ctx = make_context(cfg, config_bytes, ov);
    if (ctx.cfg.lambdas.empty())
        throw ConfigError("config: 'lambdas' must be a nonempty decreasing list for converge");

    ConvergenceTable table;
    try {
        table = lambda_convergence(ctx.cfg.pair, *ctx.cfg.triple, ctx.cfg.lambdas, ctx.cfg.mc(),
                                   ctx.cfg.convergence_target_ratio);
    } catch (const BlowUpError&) {
        return kExitNumerical;
    } catch (const ConvergenceError&) {
        return kExitNumerical;
    }

    {
        std::ofstream out(ctx.out / "convergence.csv");
        out << "lambda,resolvent_gap,resolvent_gap_stderr,yosida_sq_int,sup_gap,sup_gap_stderr,"
               "drift_residual,drift_residual_stderr,drift_residual_norm,diffusion_gap,"
               "diffusion_gap_stderr\n";
        for (const auto& r : table.rows) {
            out << csv_double(r.lambda) << ',' << csv_double(r.resolvent_gap) << ','
                << csv_double(r.resolvent_gap_se) << ',' << csv_double(r.yosida_sq_int) << ','
                << csv_double(r.sup_gap) << ',' << csv_double(r.sup_gap_se) << ','
                << csv_double(r.drift_residual) << ',' << csv_double(r.drift_residual_se) << ','
                << table.vprime_norm_label << ',' << csv_double(r.diffusion_gap) << ','
                << csv_double(r.diffusion_gap_se) << "\n";
        }
    }

    SummaryWriter summary;
    {
        std::ostringstream detail;
        detail << "columns nonincreasing over " << table.rows.size() << " lambdas";
        summary.add("lambda-convergence monotone", table.monotone_pass, detail.str());
    }
    if (table.threshold_ratio > 0.0) {
        std::ostringstream detail;
        detail << "final/first resolvent_gap="
               << csv_double(table.rows.back().resolvent_gap /
                             std::max(table.rows.front().resolvent_gap, 1e-300))
               << " sup_gap="
               << csv_double(table.rows.back().sup_gap / std::max(table.rows.front().sup_gap, 1e-300))
               << " target=" << csv_double(table.threshold_ratio);
        summary.add("lambda-convergence threshold", table.threshold_pass, detail.str());
    }
    {
        std::ostringstream detail;
        detail << "rel_dev=" << csv_double(table.resolvent_identity_rel_dev);
        summary.add("resolvent identity gap = lambda^2 * yosida", table.resolvent_identity_rel_dev <= 1e-10,
                    detail.str());
    }
    summary.flush(ctx.out);
    write_manifest(ctx, "converge");
    return summary.failures == 0 ? kExitPass : kExitCheckFailed;
}

int run_estimates(const ExperimentConfig& cfg, const std::string& config_bytes, const RunOverrides& ov) {
    const RunContext ctx = make_context(cfg, config_bytes, ov);
    const McRunConfig mc = ctx.cfg.mc();

    std::vector<EstimateReport> rows;
    try {
        const auto apriori = apriori_bound_detailed(ctx.cfg.pair, *ctx.cfg.triple,
                                                    ctx.cfg.apriori_lambda, mc);
        rows.insert(rows.end(), apriori.begin(), apriori.end());

        if (!ctx.cfg.lambdas.empty()) {
            const auto family = family_bounds(ctx.cfg.pair, *ctx.cfg.triple, ctx.cfg.lambdas, mc);
            rows.insert(rows.end(), family.begin(), family.end());
        }

        Vec X0b;
        if (ctx.cfg.lipschitz_X0_b) {
            X0b = *ctx.cfg.lipschitz_X0_b;
        } else {
            X0b = ctx.cfg.X0;
            for (double& v : X0b) v += 0.5;
        }
        McRunConfig lip = mc;
        lip.n_paths = std::min(mc.n_paths, 1000);
        rows.push_back(lipschitz_dependence(ctx.cfg.pair, *ctx.cfg.triple, ctx.cfg.X0, X0b, lip));

        // Exact discrete energy identity on one sample path.
        const NoisePath noise = NoisePath::sample(derive_path_seed(ctx.cfg.seed, 0), ctx.cfg.dt,
                                                  ctx.cfg.steps(), ctx.cfg.pair.diffusion->modes());
        const PathSolution sample = solve_regularized_em(ctx.cfg.pair, *ctx.cfg.triple,
                                                         ctx.cfg.apriori_lambda, ctx.cfg.X0, noise,
                                                         ctx.cfg.solve);
        double scale = 1.0;
        for (const Vec& s : sample.states) scale = std::max(scale, ctx.cfg.triple->h_norm_sq(s));
        EstimateReport energy;
        energy.name = "energy_identity";
        energy.lambda = ctx.cfg.apriori_lambda;
        energy.dt = ctx.cfg.dt;
        energy.t = ctx.cfg.T;
        energy.n_paths = 1;
        energy.seed = ctx.cfg.seed;
        energy.lhs = energy_identity_residual(sample, ctx.cfg.pair, *ctx.cfg.triple);
        energy.rhs = 1e-12 * scale;
        energy.margin = energy.rhs - energy.lhs;
        energy.pass = energy.lhs <= energy.rhs;
        rows.push_back(energy);
    } catch (const BlowUpError&) {
        return kExitNumerical;
    } catch (const ConvergenceError&) {
        return kExitNumerical;
    } catch (const PicardDivergenceError&) {
        return kExitNumerical;
    }

    {
        std::ofstream out(ctx.out / "estimates.csv");
        out << kEstimateCsvHeader;
        for (const auto& r : rows) append_estimate_row(out, r);
    }
    SummaryWriter summary;
    for (const auto& r : rows) summary.add(r.name, r.pass, describe(r));
    summary.flush(ctx.out);
    write_manifest(ctx, "estimates");
    return summary.failures == 0 ? kExitPass : kExitCheckFailed;
}

} // namespace sev
