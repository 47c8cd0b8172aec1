#include "sev/operators.hpp"

#include <algorithm>
#include <cmath>

#include "sev/noise.hpp"

namespace sev {

namespace {

double pow_abs(double v, double e) {
    const double a = std::abs(v);
    if (e == 2.0) return a * a;
    if (e == 1.0) return a;
    if (e == 3.0) return a * a * a;
    return std::pow(a, e);
}

double signed_power(double v, double expo) {
    if (v == 0.0) return 0.0;
    const double m = pow_abs(v, expo);
    return v > 0.0 ? m : -m;
}

} // namespace

double Drift::eval_component(double, double, std::size_t) const {
    throw InputError("Drift::eval_component: drift is not separable");
}

Vec eval_drift(const OperatorPair& pair, double t, std::span<const double> x, Scenario s) {
    Vec a = pair.drift->eval(t, x, s);
    if (!all_finite(a)) throw OperatorEvalError("drift evaluation produced non-finite components");
    return a;
}

Mat eval_diffusion(const OperatorPair& pair, double t, std::span<const double> x, Scenario s) {
    Mat B = pair.diffusion->eval(t, x, s);
    if (!all_finite(B.a)) throw OperatorEvalError("diffusion evaluation produced non-finite entries");
    return B;
}

// --------------------------------------------------------------------------- LinearDrift

Vec LinearDrift::eval(double, std::span<const double> x, Scenario) const {
    Vec a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = a_ * x[i];
    return a;
}

void LinearDrift::jacobian(double, std::span<const double> x, Mat& out) const {
    out = Mat(x.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out(i, i) = a_;
}

double LinearDrift::eval_component(double, double xi, std::size_t) const { return a_ * xi; }

// --------------------------------------------------------------------------- ScalarPowerDrift

ScalarPowerDrift::ScalarPowerDrift(double p) : p_(p) {
    if (!(p > 1.0)) throw InputError("ScalarPowerDrift: p must exceed 1");
}

Vec ScalarPowerDrift::eval(double, std::span<const double> x, Scenario) const {
    Vec a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = signed_power(x[i], p_ - 1.0);
    return a;
}

void ScalarPowerDrift::jacobian(double, std::span<const double> x, Mat& out) const {
    out = Mat(x.size(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ax = std::abs(x[i]);
        // Unbounded at 0 for p < 2; the solver falls back to bisection there.
        out(i, i) = (ax == 0.0) ? (p_ >= 2.0 ? 0.0 : 1e300) : (p_ - 1.0) * pow_abs(ax, p_ - 2.0);
    }
}

double ScalarPowerDrift::eval_component(double, double xi, std::size_t) const {
    return signed_power(xi, p_ - 1.0);
}

// --------------------------------------------------------------------------- PLaplacianDrift

PLaplacianDrift::PLaplacianDrift(double p, double mesh_width) : p_(p), h_(mesh_width) {
    if (!(p > 1.0)) throw InputError("PLaplacianDrift: p must exceed 1");
    if (!(mesh_width > 0.0)) throw InputError("PLaplacianDrift: mesh width must be positive");
}

Vec PLaplacianDrift::eval(double, std::span<const double> x, Scenario) const {
    const std::size_t n = x.size();
    Vec a(n, 0.0);
    // phi(g_e) on edges e = 0..n with Dirichlet ghost values, then a_i is the
    // backward difference of phi scaled by 1/h.
    double prev = 0.0;
    Vec phi(n + 1, 0.0);
    for (std::size_t e = 0; e <= n; ++e) {
        const double next = (e < n) ? x[e] : 0.0;
        phi[e] = signed_power((next - prev) / h_, p_ - 1.0);
        prev = next;
    }
    for (std::size_t i = 0; i < n; ++i) a[i] = (phi[i] - phi[i + 1]) / h_;
    return a;
}

void PLaplacianDrift::jacobian(double, std::span<const double> x, Mat& out) const {
    const std::size_t n = x.size();
    out = Mat(n, n);
    // phi'(g) = (p-1)|g|^{p-2} on each edge.
    Vec dphi(n + 1, 0.0);
    double prev = 0.0;
    for (std::size_t e = 0; e <= n; ++e) {
        const double next = (e < n) ? x[e] : 0.0;
        const double g = std::abs(next - prev) / h_;
        dphi[e] = (g == 0.0) ? (p_ >= 2.0 ? 0.0 : 1e300) : (p_ - 1.0) * pow_abs(g, p_ - 2.0);
        prev = next;
    }
    const double inv_h2 = 1.0 / (h_ * h_);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = (dphi[i] + dphi[i + 1]) * inv_h2;
        if (i > 0) out(i, i - 1) = -dphi[i] * inv_h2;
        if (i + 1 < n) out(i, i + 1) = -dphi[i + 1] * inv_h2;
    }
}

// --------------------------------------------------------------------------- SignDrift

Vec SignDrift::eval(double, std::span<const double> x, Scenario) const {
    Vec a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = (x[i] > 0.0) ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
    return a;
}

void SignDrift::jacobian(double, std::span<const double> x, Mat& out) const { out = Mat(x.size(), x.size()); }

double SignDrift::eval_component(double, double xi, std::size_t) const {
    return (xi > 0.0) ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
}

// --------------------------------------------------------------------------- MultiplicativeScalarDiffusion

MultiplicativeScalarDiffusion::MultiplicativeScalarDiffusion(double sigma, std::size_t n, std::size_t m)
    : sigma_(sigma), n_(n), m_(m) {
    if (m_ < 1 || m_ > n_) throw InputError("MultiplicativeScalar: need 1 <= modes <= dim");
}

Mat MultiplicativeScalarDiffusion::eval(double, std::span<const double> x, Scenario) const {
    if (x.size() != n_) throw InputError("MultiplicativeScalar: state length mismatch");
    Mat B(n_, m_);
    for (std::size_t j = 0; j < m_; ++j) B(j, j) = sigma_ * x[j];
    return B;
}

// --------------------------------------------------------------------------- checkers

namespace {

// Heavy-tailed radial sample: direction uniform on the Euclidean sphere,
// radius |Cauchy| clipped. Global conditions need the far field probed.
Vec radial_sample(CounterRng& rng, std::size_t n, double clip) {
    Vec u(n, 0.0);
    double nrm = 0.0;
    while (nrm == 0.0) {
        for (std::size_t i = 0; i < n; ++i) u[i] = rng.next_normal();
        nrm = 0.0;
        for (double v : u) nrm += v * v;
        nrm = std::sqrt(nrm);
    }
    const double r = std::min(std::abs(std::tan(3.14159265358979323846 * (rng.next_uniform() - 0.5))), clip);
    for (double& v : u) v *= r / nrm;
    return u;
}

} // namespace

AssumptionReport check_assumptions(const OperatorPair& pair, const GelfandTriple& triple, int samples,
                                   std::uint64_t seed, const AssumptionCheckOptions& opts) {
    if (samples < 1) throw InputError("check_assumptions: samples must be >= 1");
    const std::size_t n = triple.dim();
    CounterRng rng(derive_path_seed(seed, 0xA55E55ull));

    AssumptionReport rep;
    rep.samples = samples;
    rep.seed = seed;
    rep.min_joint_monotonicity_margin = std::numeric_limits<double>::infinity();
    rep.min_coercivity_margin = std::numeric_limits<double>::infinity();
    rep.max_growth_violation = -std::numeric_limits<double>::infinity();

    Vec diff(n);
    for (int s = 0; s < samples; ++s) {
        const double t = opts.horizon * rng.next_uniform();
        const Vec x = radial_sample(rng, n, opts.radius_clip);
        const Vec y = radial_sample(rng, n, opts.radius_clip);

        const Vec ax = eval_drift(pair, t, x);
        const Vec ay = eval_drift(pair, t, y);
        const Mat bx = eval_diffusion(pair, t, x);
        const Mat by = eval_diffusion(pair, t, y);

        for (std::size_t i = 0; i < n; ++i) diff[i] = x[i] - y[i];
        Mat bdiff(bx.rows, bx.cols);
        for (std::size_t i = 0; i < bx.a.size(); ++i) bdiff.a[i] = bx.a[i] - by.a[i];

        Vec adiff(n);
        for (std::size_t i = 0; i < n; ++i) adiff[i] = ax[i] - ay[i];
        const double pair_term = triple.pairing(adiff, diff);
        const double bdiff_term = 0.5 * triple.hs_norm_sq(bdiff);
        const double shift_term = pair.c2 * triple.h_norm_sq(diff);
        const double joint_scale = std::max(1.0, std::abs(pair_term) + bdiff_term + shift_term);
        rep.min_joint_monotonicity_margin = std::min(
            rep.min_joint_monotonicity_margin, (pair_term - bdiff_term + shift_term) / joint_scale);

        const double ax_term = triple.pairing(ax, x);
        const double bx_term = 0.5 * triple.hs_norm_sq(bx);
        const double v_term = pair.c1 * triple.v_norm_pow(x);
        const double h_term = pair.c2 * triple.h_norm_sq(x);
        const double f_term = pair.f(t);
        const double coercive_scale = std::max(1.0, std::abs(ax_term) + bx_term + v_term + h_term + f_term);
        rep.min_coercivity_margin =
            std::min(rep.min_coercivity_margin,
                     (ax_term - bx_term - v_term + h_term + f_term) / coercive_scale);

        // Lower bound of the dual norm, so a positive violation is certified.
        const double dual = triple.dual_norm_estimate(ax, opts.dual_iterations);
        const double dual_term = std::pow(dual, triple.q());
        const double growth_term = pair.C_growth * triple.v_norm_pow(x) + pair.g(t);
        const double growth_scale = std::max(1.0, dual_term + growth_term);
        rep.max_growth_violation =
            std::max(rep.max_growth_violation, (dual_term - growth_term) / growth_scale);
    }
    return rep;
}

HemicontinuityReport check_hemicontinuity(const OperatorPair& pair, const GelfandTriple& triple,
                                          int samples, std::uint64_t seed, double horizon) {
    if (samples < 1) throw InputError("check_hemicontinuity: samples must be >= 1");
    const std::size_t n = triple.dim();
    CounterRng rng(derive_path_seed(seed, 0xCAFEull));

    constexpr int kLevels = 12; // finest grid has 2^12 + 1 points on [-1, 1]
    const std::size_t fine_points = (std::size_t{1} << kLevels) + 1;

    HemicontinuityReport rep;
    rep.pass = true;

    Vec values(fine_points);
    Vec probe(n);
    for (int s = 0; s < samples; ++s) {
        const double t = horizon * rng.next_uniform();
        const Vec x = radial_sample(rng, n, 1e3);
        const Vec y = radial_sample(rng, n, 1e3);
        const Vec z = radial_sample(rng, n, 1e3);

        for (std::size_t j = 0; j < fine_points; ++j) {
            const double r = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(fine_points - 1);
            for (std::size_t i = 0; i < n; ++i) probe[i] = x[i] + r * y[i];
            values[j] = triple.pairing(pair.drift->eval(t, probe), z);
        }

        double scale = 0.0;
        for (double v : values) scale = std::max(scale, std::abs(v));
        const double floor = 1e-12 * std::max(1.0, scale);

        // Max jump between adjacent points of each dyadic sub-grid.
        double jumps[kLevels + 1];
        for (int lvl = 0; lvl <= kLevels; ++lvl) {
            const std::size_t stride = std::size_t{1} << (kLevels - lvl);
            double worst = 0.0;
            for (std::size_t j = 0; j + stride < fine_points; j += stride)
                worst = std::max(worst, std::abs(values[j + stride] - values[j]));
            jumps[lvl] = worst;
        }
        // For J_l ~ C 2^-l + D the extrapolated limit 2 J_{l+1} - J_l isolates
        // the genuine discontinuity D; it vanishes to roundoff for smooth maps.
        rep.worst_jump =
            std::max(rep.worst_jump, std::max(0.0, 2.0 * jumps[kLevels] - jumps[kLevels - 1]));

        if (jumps[kLevels] <= floor) continue; // flat to roundoff: continuous
        double ratio = 0.0;
        for (int lvl = kLevels - 3; lvl < kLevels; ++lvl)
            ratio = std::max(ratio, jumps[lvl + 1] / std::max(jumps[lvl], floor));
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        if (ratio > 0.9) rep.pass = false;
    }
    return rep;
}

const std::vector<InstanceInfo>& operator_instances() {
    static const std::vector<InstanceInfo> table = {
        {"LinearDrift", "drift", "a: coefficient (A x = a x)"},
        {"ScalarPower", "drift", "p: exponent (a_i = |x_i|^{p-2} x_i)"},
        {"DiscretePLaplacian", "drift", "p: exponent; mesh_width: grid spacing (1-D Dirichlet)"},
        {"SignDrift", "drift", "none (discontinuous test instance, violates hemicontinuity)"},
        {"ZeroDiffusion", "diffusion", "modes: noise dimension"},
        {"MultiplicativeScalar", "diffusion", "sigma: factor; modes: driven components (B_jj = sigma x_j)"},
        {"AdditiveNoise", "diffusion", "g0_scale: diagonal value, or g0: explicit n x modes matrix"},
    };
    return table;
}

} // namespace sev
