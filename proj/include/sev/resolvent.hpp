#pragma once

#include <span>

#include "sev/operators.hpp"
#include "sev/triple.hpp"

namespace sev {

enum class ResolveMethod { Newton, DampedNewton, FixedPoint, Bisection };

const char* to_string(ResolveMethod m);

struct ResolventSolution {
    Vec point;                   // J_lambda(t, y)
    double residual_h_norm = 0.0; // ||J + lambda Atilde(t,J) - y||_H at return
    int iterations = 0;
    ResolveMethod method_used = ResolveMethod::Newton;
};

struct ResolveOptions {
    /// Residual target in H norm; negative means 1e-10 * max(1, ||y||_H).
    double tol = -1.0;
    int max_iterations = 10000;
};

/// Solve x + mu (A(t, x) + shift x) = y for the monotone drifts shipped here.
/// Newton with backtracking damping on ||F||_H, falling back to per-component
/// bisection for separable drifts and to the contractive fixed-point map when
/// the scaled Lipschitz estimate allows it.
ResolventSolution solve_shifted(const Drift& drift, const GelfandTriple& triple, double mu, double shift,
                                double t, std::span<const double> y, const ResolveOptions& opts = {});

/// Resolvent J_lambda of Atilde = A + c2 I: the solution of J + lambda Atilde(t,J) = y.
ResolventSolution resolve(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
                          std::span<const double> y, const ResolveOptions& opts = {});

/// Yosida approximation Atilde_lambda(t, x), returned in the (x - J_lambda x)/lambda
/// form. This form keeps the discrete energy algebra of the regularized
/// equation exact even when lambda is small; it differs from Atilde(t, J) by
/// residual/lambda.
Vec yosida(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
           std::span<const double> x, const ResolveOptions& opts = {});

/// Regularized diffusion B_lambda(t, x) = B(t, J_lambda(t, x)).
Mat regularized_diffusion(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
                          std::span<const double> x, const ResolveOptions& opts = {});

} // namespace sev
