#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sev/runner.hpp"

using namespace sev;
namespace fs = std::filesystem;

namespace {

const char* kTinyGbm = R"({
  "name": "tiny-gbm",
  "triple": {"dim": 2, "p": 2.0},
  "operator": {
    "drift": {"name": "LinearDrift", "a": 2.0},
    "diffusion": {"name": "MultiplicativeScalar", "sigma": 0.5, "modes": 2},
    "constants": {"c1": 1.875, "c2": 0.0, "p": 2.0, "C": 4.0}
  },
  "horizon": {"T": 1.0, "dt": 0.03125},
  "lambdas": [1.0, 0.5],
  "paths": 40,
  "seed": 99,
  "scheme": "explicit_em",
  "X0": [1.0, 0.5],
  "estimates": {"apriori_lambda": 0.5, "assumption_samples": 60, "hemicontinuity_samples": 8}
})";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("sev_runner_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("config parsing: happy path") {
    const ExperimentConfig cfg = parse_config_text(kTinyGbm);
    CHECK(cfg.name == "tiny-gbm");
    CHECK(cfg.triple->dim() == 2);
    CHECK(cfg.pair.drift->name() == "LinearDrift");
    CHECK(cfg.pair.diffusion->name() == "MultiplicativeScalar");
    CHECK(cfg.pair.c1 == 1.875);
    CHECK(cfg.steps() == 32);
    CHECK(cfg.lambdas == std::vector<double>{1.0, 0.5});
}

TEST_CASE("config parsing: malformed inputs carry the offending key") {
    CHECK_THROWS_AS((void)parse_config_text("not json"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("{}"), ConfigError);

    auto expect_error = [](const std::string& text, const std::string& fragment) {
        try {
            (void)parse_config_text(text);
            FAIL_CHECK("expected ConfigError for: " << fragment);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };

    std::string bad_drift = kTinyGbm;
    bad_drift.replace(bad_drift.find("LinearDrift"), 11, "NoSuchDrift");
    expect_error(bad_drift, "known instances");

    std::string bad_dt = kTinyGbm;
    bad_dt.replace(bad_dt.find("0.03125"), 7, "0.03000");
    expect_error(bad_dt, "positive integer");

    std::string empty_lambdas = kTinyGbm;
    empty_lambdas.replace(empty_lambdas.find("[1.0, 0.5]"), 10, "[]");
    expect_error(empty_lambdas, "lambdas");

    std::string increasing = kTinyGbm;
    increasing.replace(increasing.find("[1.0, 0.5]"), 10, "[0.5, 1.0]");
    expect_error(increasing, "decreasing");

    std::string bad_x0 = kTinyGbm;
    bad_x0.replace(bad_x0.find("[1.0, 0.5]", bad_x0.find("X0")), 10, "[1.0]");
    expect_error(bad_x0, "X0");

    std::string bad_p = kTinyGbm;
    bad_p.replace(bad_p.find("\"p\": 2.0, \"C\""), 8, "\"p\": 4.0");
    expect_error(bad_p, "match triple.p");
}

TEST_CASE("every shipped instance name round-trips through config parsing") {
    auto config_for = [](const std::string& drift, const std::string& diffusion) {
        std::ostringstream ss;
        ss << R"({"triple": {"dim": 4, "p": 3.0, "h_weights": "mesh",
                 "v_norm": {"kind": "discrete_gradient_lp", "mesh_width": 0.2}},)";
        ss << R"("operator": {"drift": )" << drift << R"(, "diffusion": )" << diffusion;
        ss << R"(, "constants": {"c1": 1.0, "c2": 0.125, "p": 3.0, "C": 1.0}},)";
        ss << R"("horizon": {"T": 1.0, "dt": 0.25}, "X0": [0.1, 0.2, 0.1, 0.0]})";
        return ss.str();
    };
    const char* drifts[] = {
        R"({"name": "LinearDrift", "a": 1.0})",
        R"({"name": "ScalarPower", "p": 3.0})",
        R"({"name": "DiscretePLaplacian", "p": 3.0, "mesh_width": 0.2})",
        R"({"name": "SignDrift"})",
    };
    const char* diffusions[] = {
        R"({"name": "ZeroDiffusion", "modes": 2})",
        R"({"name": "MultiplicativeScalar", "sigma": 0.5, "modes": 2})",
        R"({"name": "AdditiveNoise", "modes": 2, "g0_scale": 0.3})",
    };
    for (const char* d : drifts)
        for (const char* b : diffusions) CHECK_NOTHROW((void)parse_config_text(config_for(d, b)));
}

TEST_CASE("list_instances_text names the shipped set") {
    const std::string text = list_instances_text();
    for (const char* name :
         {"LinearDrift", "ScalarPower", "DiscretePLaplacian", "AdditiveNoise", "MultiplicativeScalar"})
        CHECK(text.find(name) != std::string::npos);
}

TEST_CASE("run_estimates produces artifacts and passes on the tiny config") {
    const ExperimentConfig cfg = parse_config_text(kTinyGbm);
    const fs::path dir = fresh_dir("estimates");
    RunOverrides ov;
    ov.out_dir = dir.string();
    ov.jobs = 1;
    CHECK(run_estimates(cfg, kTinyGbm, ov) == kExitPass);
    CHECK(fs::exists(dir / "estimates.csv"));
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(fs::exists(dir / "manifest.json"));
    const std::string csv = read_file(dir / "estimates.csv");
    CHECK(csv.rfind("name,lambda,dt,t,n_paths,seed,lhs,rhs,margin,stderr,slack,pass", 0) == 0);
    CHECK(csv.find("apriori") != std::string::npos);
    CHECK(csv.find("family.sup_E_H2") != std::string::npos);
    CHECK(csv.find("lipschitz") != std::string::npos);
    CHECK(csv.find("energy_identity") != std::string::npos);
    const std::string summary = read_file(dir / "summary.txt");
    CHECK(summary.find("ALL CHECKS PASSED") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("identical config and seed give byte-identical CSVs") {
    const ExperimentConfig cfg = parse_config_text(kTinyGbm);
    const fs::path d1 = fresh_dir("det1");
    const fs::path d2 = fresh_dir("det2");
    for (const auto& dir : {d1, d2}) {
        RunOverrides ov;
        ov.out_dir = dir.string();
        ov.jobs = 1;
        CHECK(run_estimates(cfg, kTinyGbm, ov) == kExitPass);
        CHECK(run_converge(cfg, kTinyGbm, ov) == kExitPass);
        CHECK(run_check_assumptions(cfg, kTinyGbm, ov) == kExitPass);
    }
    for (const char* file : {"estimates.csv", "convergence.csv", "assumptions.csv"})
        CHECK(read_file(d1 / file) == read_file(d2 / file));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("seed override changes the artifacts") {
    const ExperimentConfig cfg = parse_config_text(kTinyGbm);
    const fs::path d1 = fresh_dir("seed1");
    const fs::path d2 = fresh_dir("seed2");
    RunOverrides ov1;
    ov1.out_dir = d1.string();
    ov1.jobs = 1;
    CHECK(run_estimates(cfg, kTinyGbm, ov1) == kExitPass);
    RunOverrides ov2;
    ov2.out_dir = d2.string();
    ov2.jobs = 1;
    ov2.seed = 123456;
    ov2.has_seed_override = true;
    CHECK(run_estimates(cfg, kTinyGbm, ov2) == kExitPass);
    CHECK(read_file(d1 / "estimates.csv") != read_file(d2 / "estimates.csv"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("run_solve writes the path artifacts") {
    const ExperimentConfig cfg = parse_config_text(kTinyGbm);
    const fs::path dir = fresh_dir("solve");
    RunOverrides ov;
    ov.out_dir = dir.string();
    CHECK(run_solve(cfg, kTinyGbm, ov) == kExitPass);
    const std::string csv = read_file(dir / "path.csv");
    CHECK(csv.rfind("t,x_1,x_2\n", 0) == 0);
    CHECK(fs::exists(dir / "path.bin"));
    CHECK(fs::exists(dir / "noise.bin"));
    fs::remove_all(dir);
}

TEST_CASE("run_check_assumptions fails loudly on the discontinuous instance") {
    std::string cfg_text = kTinyGbm;
    cfg_text.replace(cfg_text.find(R"({"name": "LinearDrift", "a": 2.0})"), 33,
                     R"({"name": "SignDrift"})");
    const ExperimentConfig cfg = parse_config_text(cfg_text);
    const fs::path dir = fresh_dir("sign");
    RunOverrides ov;
    ov.out_dir = dir.string();
    CHECK(run_check_assumptions(cfg, cfg_text, ov) == kExitCheckFailed);
    const std::string summary = read_file(dir / "summary.txt");
    CHECK(summary.find("FAIL") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("shipped configs parse and validate") {
    for (const char* file : {"configs/gbm.json", "configs/scalar_power_additive.json",
                             "configs/p_laplacian.json", "configs/linear_convergence.json",
                             "configs/determinism.json"}) {
        CAPTURE(file);
        CHECK_NOTHROW((void)parse_config_file(file));
    }
}

TEST_CASE("fnv1a is stable and separating") {
    CHECK(fnv1a("abc") == fnv1a("abc"));
    CHECK(fnv1a("abc") != fnv1a("abd"));
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
}

TEST_CASE("affine forcing profile parses and evaluates") {
    std::string text = kTinyGbm;
    const std::string ops = R"("constants": {"c1": 1.875, "c2": 0.0, "p": 2.0, "C": 4.0})";
    text.replace(text.find(ops), ops.size(),
                 ops + R"(, "f": {"kind": "affine", "value": 0.25, "slope": 0.5})");
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.pair.f(0.0) == 0.25);
    CHECK(cfg.pair.f(2.0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("numerical blow-up surfaces as the numerical exit code") {
    // huge coefficient + tiny lambda: the explicit scheme overflows quickly
    std::string text = kTinyGbm;
    text.replace(text.find("\"a\": 2.0"), 8, "\"a\": 1e9");
    text.replace(text.find("\"apriori_lambda\": 0.5"), 21, "\"apriori_lambda\": 1e-9");
    const ExperimentConfig cfg = parse_config_text(text);
    const fs::path dir = fresh_dir("blowup");
    RunOverrides ov;
    ov.out_dir = dir.string();
    CHECK(run_estimates(cfg, text, ov) == kExitNumerical);
    fs::remove_all(dir);
}
