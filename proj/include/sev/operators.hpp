#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sev/linalg.hpp"
#include "sev/triple.hpp"

namespace sev {

/// Slot for scenario-dependent (omega-dependent) coefficients. The shipped
/// instances are deterministic and ignore it; it is forwarded so random
/// operators can be added without changing call sites.
struct Scenario {
    std::uint64_t token = 0;
};

enum class JacobianKind { Diagonal, Tridiagonal, Dense };

/// Drift A: [0,T] x V -> V', in H coordinates: <A(t,x), v> = sum_i w_i a_i v_i.
class Drift {
public:
    virtual ~Drift() = default;
    virtual std::string name() const = 0;
    virtual Vec eval(double t, std::span<const double> x, Scenario s = {}) const = 0;

    virtual JacobianKind jacobian_kind() const = 0;
    /// d a_i / d x_j of the coordinate map, filled according to jacobian_kind():
    /// Diagonal fills diag only, Tridiagonal fills three bands, Dense fills all.
    virtual void jacobian(double t, std::span<const double> x, Mat& out) const = 0;

    /// Component-separable drifts (a_i depends on x_i only) admit a robust
    /// per-component bisection fallback in the resolvent solver.
    virtual bool separable() const { return false; }
    virtual double eval_component(double t, double xi, std::size_t i) const;
};

/// Diffusion B: [0,T] x V -> HS(U_m; H), as an n x modes coordinate matrix.
class Diffusion {
public:
    virtual ~Diffusion() = default;
    virtual std::string name() const = 0;
    virtual std::size_t modes() const = 0;
    virtual Mat eval(double t, std::span<const double> x, Scenario s = {}) const = 0;
};

/// Deterministic nonnegative forcing profile t -> value.
using ForcingProfile = std::function<double(double)>;

inline ForcingProfile constant_profile(double v) {
    return [v](double) { return v; };
}

/// A drift/diffusion pair together with its structural constants: the
/// coercivity/monotonicity constants (c1, c2), growth exponent p, growth
/// constant C and the forcing profiles f, g.
struct OperatorPair {
    std::shared_ptr<const Drift> drift;
    std::shared_ptr<const Diffusion> diffusion;
    double c1 = 1.0;
    double c2 = 0.0;
    double p = 2.0;
    double C_growth = 1.0;
    ForcingProfile f = constant_profile(0.0);
    ForcingProfile g = constant_profile(0.0);
};

/// Wrappers with finiteness checks; these are the public evaluation surface.
Vec eval_drift(const OperatorPair& pair, double t, std::span<const double> x, Scenario s = {});
Mat eval_diffusion(const OperatorPair& pair, double t, std::span<const double> x, Scenario s = {});

// ---------------------------------------------------------------------------
// Shipped instances.

/// A x = a x.
class LinearDrift final : public Drift {
public:
    explicit LinearDrift(double a) : a_(a) {}
    std::string name() const override { return "LinearDrift"; }
    Vec eval(double t, std::span<const double> x, Scenario s = {}) const override;
    JacobianKind jacobian_kind() const override { return JacobianKind::Diagonal; }
    void jacobian(double t, std::span<const double> x, Mat& out) const override;
    bool separable() const override { return true; }
    double eval_component(double t, double xi, std::size_t i) const override;
    double coefficient() const { return a_; }

private:
    double a_;
};

/// Component-wise odd power: a_i = |x_i|^{p-2} x_i.
class ScalarPowerDrift final : public Drift {
public:
    explicit ScalarPowerDrift(double p);
    std::string name() const override { return "ScalarPower"; }
    Vec eval(double t, std::span<const double> x, Scenario s = {}) const override;
    JacobianKind jacobian_kind() const override { return JacobianKind::Diagonal; }
    void jacobian(double t, std::span<const double> x, Mat& out) const override;
    bool separable() const override { return true; }
    double eval_component(double t, double xi, std::size_t i) const override;
    double exponent() const { return p_; }

private:
    double p_;
};

/// 1-D Dirichlet p-Laplacian, A = -div_h(|grad_h x|^{p-2} grad_h x), on a grid
/// with mesh width h and ghost zeros at both ends. With H weights w_i = h this
/// satisfies <A(x), x> = ||x||_V^p exactly for the discrete gradient V norm.
class PLaplacianDrift final : public Drift {
public:
    PLaplacianDrift(double p, double mesh_width);
    std::string name() const override { return "DiscretePLaplacian"; }
    Vec eval(double t, std::span<const double> x, Scenario s = {}) const override;
    JacobianKind jacobian_kind() const override { return JacobianKind::Tridiagonal; }
    void jacobian(double t, std::span<const double> x, Mat& out) const override;
    double exponent() const { return p_; }
    double mesh_width() const { return h_; }

private:
    double p_;
    double h_;
};

/// Intentionally invalid test instance: a_i = sign(x_i) is not hemicontinuous.
class SignDrift final : public Drift {
public:
    std::string name() const override { return "SignDrift"; }
    Vec eval(double t, std::span<const double> x, Scenario s = {}) const override;
    JacobianKind jacobian_kind() const override { return JacobianKind::Diagonal; }
    void jacobian(double t, std::span<const double> x, Mat& out) const override;
    bool separable() const override { return true; }
    double eval_component(double t, double xi, std::size_t i) const override;
};

class ZeroDiffusion final : public Diffusion {
public:
    ZeroDiffusion(std::size_t n, std::size_t m) : n_(n), m_(m) {}
    std::string name() const override { return "ZeroDiffusion"; }
    std::size_t modes() const override { return m_; }
    Mat eval(double, std::span<const double>, Scenario = {}) const override { return Mat(n_, m_); }

private:
    std::size_t n_, m_;
};

/// B_ij = sigma * x_i for i == j < modes: multiplicative noise, one Wiener
/// mode per driven component, truncated to the first `modes` components.
class MultiplicativeScalarDiffusion final : public Diffusion {
public:
    MultiplicativeScalarDiffusion(double sigma, std::size_t n, std::size_t m);
    std::string name() const override { return "MultiplicativeScalar"; }
    std::size_t modes() const override { return m_; }
    Mat eval(double t, std::span<const double> x, Scenario s = {}) const override;
    double sigma() const { return sigma_; }

private:
    double sigma_;
    std::size_t n_, m_;
};

/// B == G0 constant.
class AdditiveDiffusion final : public Diffusion {
public:
    explicit AdditiveDiffusion(Mat G0) : G0_(std::move(G0)) {}
    std::string name() const override { return "AdditiveNoise"; }
    std::size_t modes() const override { return G0_.cols; }
    Mat eval(double, std::span<const double>, Scenario = {}) const override { return G0_; }
    const Mat& matrix() const { return G0_; }

private:
    Mat G0_;
};

// ---------------------------------------------------------------------------
// Sampled structural checks.

/// Margins of the joint monotonicity/coercivity conditions and of the dual
/// growth bound over a heavy-tailed sample. Negative min margins or a
/// positive max violation mean the declared constants do not hold.
///
/// Margins are normalized per sample by the magnitude of the terms entering
/// the condition (floored at 1), so the tolerance acts relatively on large
/// samples and absolutely near zero; the raw margins span ~12 orders of
/// magnitude under the heavy-tailed sampling and would drown the tolerance.
struct AssumptionReport {
    double min_joint_monotonicity_margin = 0.0;
    double min_coercivity_margin = 0.0;
    double max_growth_violation = 0.0;
    int samples = 0;
    std::uint64_t seed = 0;

    static constexpr double tol_assume = 1e-8;
    bool pass() const {
        return min_joint_monotonicity_margin >= -tol_assume && min_coercivity_margin >= -tol_assume &&
               max_growth_violation <= tol_assume;
    }
};

struct AssumptionCheckOptions {
    double horizon = 1.0;       // times sampled uniformly on [0, horizon]
    double radius_clip = 1e6;   // |Cauchy| radius clip
    int dual_iterations = 80;   // ascent budget for the V' lower bound
};

AssumptionReport check_assumptions(const OperatorPair& pair, const GelfandTriple& triple, int samples,
                                   std::uint64_t seed, const AssumptionCheckOptions& opts = {});

/// Dyadic refinement probe of r -> <A(t, x + r y), z>. Jumps between adjacent
/// grid values must shrink under refinement for a hemicontinuous drift.
struct HemicontinuityReport {
    bool pass = false;
    double worst_jump = 0.0;  // finest-level jump, worst sample
    double worst_ratio = 0.0; // largest late-level jump decay ratio
};

HemicontinuityReport check_hemicontinuity(const OperatorPair& pair, const GelfandTriple& triple,
                                          int samples, std::uint64_t seed, double horizon = 1.0);

// ---------------------------------------------------------------------------
// Instance registry (names + parameter schemas, used by config and the CLI).

struct InstanceInfo {
    std::string name;
    std::string kind; // "drift" or "diffusion"
    std::string params;
};

const std::vector<InstanceInfo>& operator_instances();

} // namespace sev
