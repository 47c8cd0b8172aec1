#include "sev/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sev {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError("config: key '" + key + "': " + what);
}

double require_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number()) fail(key, "expected a number");
    return j[key].get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(key, "expected a number");
    return j[key].get<double>();
}

std::string require_string(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_string()) fail(key, "expected a string");
    return j[key].get<std::string>();
}

Vec number_list(const json& j, const std::string& key) {
    if (!j.is_array()) fail(key, "expected an array of numbers");
    Vec out;
    for (const auto& v : j) {
        if (!v.is_number()) fail(key, "expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

ForcingProfile parse_profile(const json& j, const std::string& key) {
    if (j.is_number()) return constant_profile(j.get<double>());
    if (!j.is_object()) fail(key, "expected a number or an object");
    const std::string kind = require_string(j, "kind");
    if (kind == "constant") {
        const double v = require_number(j, "value");
        return constant_profile(v);
    }
    if (kind == "affine") {
        const double v = require_number(j, "value");
        const double slope = number_or(j, "slope", 0.0);
        return [v, slope](double t) { return v + slope * t; };
    }
    fail(key + ".kind", "unknown profile kind '" + kind + "' (constant, affine)");
}

std::shared_ptr<GelfandTriple> parse_triple(const json& j) {
    if (!j.is_object()) fail("triple", "expected an object");
    const auto dim = static_cast<std::size_t>(require_number(j, "dim"));
    const double p = require_number(j, "p");

    VNormSpec vnorm;
    double auto_mesh = 1.0 / static_cast<double>(dim + 1);
    if (j.contains("v_norm")) {
        const json& vn = j["v_norm"];
        const std::string kind = require_string(vn, "kind");
        if (kind == "plain_lp")
            vnorm.kind = VNormKind::PlainLp;
        else if (kind == "discrete_gradient_lp")
            vnorm.kind = VNormKind::DiscreteGradientLp;
        else
            fail("triple.v_norm.kind", "unknown kind '" + kind + "' (plain_lp, discrete_gradient_lp)");
        vnorm.mesh_width = number_or(vn, "mesh_width", auto_mesh);
    }

    Vec weights(dim, 1.0);
    if (j.contains("h_weights")) {
        const json& w = j["h_weights"];
        if (w.is_number()) {
            weights.assign(dim, w.get<double>());
        } else if (w.is_string() && w.get<std::string>() == "mesh") {
            weights.assign(dim, vnorm.mesh_width);
        } else {
            weights = number_list(w, "triple.h_weights");
        }
    }
    return std::make_shared<GelfandTriple>(dim, std::move(weights), p, vnorm);
}

std::string known_instances_message() {
    std::string msg = "known instances:";
    for (const auto& info : operator_instances()) msg += " " + info.name + " (" + info.kind + ")";
    return msg;
}

std::shared_ptr<const Drift> parse_drift(const json& j, std::size_t dim) {
    (void)dim;
    const std::string name = require_string(j, "name");
    if (name == "LinearDrift") return std::make_shared<LinearDrift>(require_number(j, "a"));
    if (name == "ScalarPower") return std::make_shared<ScalarPowerDrift>(require_number(j, "p"));
    if (name == "DiscretePLaplacian")
        return std::make_shared<PLaplacianDrift>(require_number(j, "p"),
                                                 require_number(j, "mesh_width"));
    if (name == "SignDrift") return std::make_shared<SignDrift>();
    fail("operator.drift.name", "unknown drift '" + name + "'; " + known_instances_message());
}

std::shared_ptr<const Diffusion> parse_diffusion(const json& j, std::size_t dim) {
    const std::string name = require_string(j, "name");
    if (name == "ZeroDiffusion") {
        const auto m = static_cast<std::size_t>(number_or(j, "modes", 1.0));
        return std::make_shared<ZeroDiffusion>(dim, m);
    }
    if (name == "MultiplicativeScalar") {
        const double sigma = require_number(j, "sigma");
        const auto m = static_cast<std::size_t>(number_or(j, "modes", static_cast<double>(dim)));
        return std::make_shared<MultiplicativeScalarDiffusion>(sigma, dim, m);
    }
    if (name == "AdditiveNoise") {
        const auto m = static_cast<std::size_t>(number_or(j, "modes", 1.0));
        Mat G0(dim, m);
        if (j.contains("g0")) {
            const json& rows = j["g0"];
            if (!rows.is_array() || rows.size() != dim) fail("operator.diffusion.g0", "expected dim rows");
            for (std::size_t i = 0; i < dim; ++i) {
                const Vec row = number_list(rows[i], "operator.diffusion.g0");
                if (row.size() != m) fail("operator.diffusion.g0", "expected modes columns");
                for (std::size_t c = 0; c < m; ++c) G0(i, c) = row[c];
            }
        } else {
            const double scale = number_or(j, "g0_scale", 1.0);
            for (std::size_t i = 0; i < std::min(dim, m); ++i) G0(i, i) = scale;
        }
        return std::make_shared<AdditiveDiffusion>(std::move(G0));
    }
    fail("operator.diffusion.name", "unknown diffusion '" + name + "'; " + known_instances_message());
}

Scheme parse_scheme(const std::string& s) {
    if (s == "explicit_em") return Scheme::ExplicitEM;
    if (s == "picard_em") return Scheme::PicardEM;
    if (s == "implicit_reference") return Scheme::ImplicitReference;
    fail("scheme", "unknown scheme '" + s + "' (explicit_em, picard_em, implicit_reference)");
}

} // namespace

std::size_t ExperimentConfig::steps() const {
    const double ratio = T / dt;
    const auto n = static_cast<std::size_t>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("config: horizon.T / horizon.dt must be a positive integer");
    return n;
}

McRunConfig ExperimentConfig::mc() const {
    McRunConfig mc;
    mc.T = T;
    mc.dt = dt;
    mc.n_paths = paths;
    mc.seed = seed;
    mc.jobs = jobs;
    mc.X0 = X0;
    mc.solve = solve;
    mc.measure_slack = measure_slack;
    return mc;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + origin + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: " + origin + ": top level must be an object");

    ExperimentConfig cfg;
    if (root.contains("name")) cfg.name = require_string(root, "name");
    if (!root.contains("triple")) throw ConfigError("config: missing 'triple'");
    cfg.triple = parse_triple(root["triple"]);
    const std::size_t dim = cfg.triple->dim();

    if (!root.contains("operator") || !root["operator"].is_object())
        throw ConfigError("config: missing 'operator' object");
    const json& op = root["operator"];
    if (!op.contains("drift") || !op.contains("diffusion"))
        throw ConfigError("config: operator needs 'drift' and 'diffusion'");
    cfg.pair.drift = parse_drift(op["drift"], dim);
    cfg.pair.diffusion = parse_diffusion(op["diffusion"], dim);
    if (op.contains("constants")) {
        const json& c = op["constants"];
        cfg.pair.c1 = number_or(c, "c1", 1.0);
        cfg.pair.c2 = number_or(c, "c2", 0.0);
        cfg.pair.p = number_or(c, "p", cfg.triple->p());
        cfg.pair.C_growth = number_or(c, "C", 1.0);
    } else {
        cfg.pair.p = cfg.triple->p();
    }
    if (op.contains("f")) cfg.pair.f = parse_profile(op["f"], "operator.f");
    if (op.contains("g")) cfg.pair.g = parse_profile(op["g"], "operator.g");
    if (!(cfg.pair.c1 > 0.0)) throw ConfigError("config: operator.constants.c1 must be positive");
    if (cfg.pair.c2 < 0.0) throw ConfigError("config: operator.constants.c2 must be nonnegative");
    if (cfg.pair.p != cfg.triple->p())
        throw ConfigError("config: operator.constants.p must match triple.p");

    if (!root.contains("horizon") || !root["horizon"].is_object())
        throw ConfigError("config: missing 'horizon' object");
    cfg.T = require_number(root["horizon"], "T");
    cfg.dt = require_number(root["horizon"], "dt");

    if (root.contains("lambdas")) {
        cfg.lambdas = number_list(root["lambdas"], "lambdas");
        if (cfg.lambdas.empty()) throw ConfigError("config: lambdas must be nonempty");
        for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
            if (!(cfg.lambdas[i] > 0.0)) throw ConfigError("config: lambdas must be positive");
            if (i > 0 && !(cfg.lambdas[i] < cfg.lambdas[i - 1]))
                throw ConfigError("config: lambdas must be strictly decreasing");
        }
    }

    cfg.paths = static_cast<int>(number_or(root, "paths", 1.0));
    if (cfg.paths < 1) throw ConfigError("config: paths must be >= 1");
    cfg.seed = static_cast<std::uint64_t>(number_or(root, "seed", 1.0));
    if (root.contains("scheme")) cfg.scheme = parse_scheme(require_string(root, "scheme"));

    if (root.contains("tolerances")) {
        const json& t = root["tolerances"];
        cfg.solve.resolve.tol = number_or(t, "resolvent", -1.0);
        cfg.solve.tol_picard = number_or(t, "picard", 1e-9);
        cfg.solve.resolve.max_iterations =
            static_cast<int>(number_or(t, "resolvent_max_iterations", 10000.0));
        cfg.solve.max_picard = static_cast<int>(number_or(t, "picard_max_iterations", 200.0));
    }

    if (!root.contains("X0")) throw ConfigError("config: missing 'X0'");
    cfg.X0 = number_list(root["X0"], "X0");
    if (cfg.X0.size() != dim) throw ConfigError("config: X0 length must equal triple.dim");

    if (root.contains("outputs")) cfg.outputs = require_string(root, "outputs");

    if (root.contains("estimates")) {
        const json& e = root["estimates"];
        cfg.apriori_lambda = number_or(e, "apriori_lambda", 0.5);
        cfg.convergence_target_ratio = number_or(e, "convergence_target_ratio", 0.0);
        if (e.contains("measure_slack")) cfg.measure_slack = e["measure_slack"].get<bool>();
        if (e.contains("lipschitz_X0_b")) {
            Vec b = number_list(e["lipschitz_X0_b"], "estimates.lipschitz_X0_b");
            if (b.size() != dim) throw ConfigError("config: estimates.lipschitz_X0_b length != dim");
            cfg.lipschitz_X0_b = std::move(b);
        }
        cfg.assumption_samples = static_cast<int>(number_or(e, "assumption_samples", 200.0));
        cfg.hemicontinuity_samples = static_cast<int>(number_or(e, "hemicontinuity_samples", 32.0));
    }

    cfg.steps(); // validate T/dt
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace sev
