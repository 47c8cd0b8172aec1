#pragma once

#include <iosfwd>
#include <string>

#include "sev/noise.hpp"
#include "sev/operators.hpp"
#include "sev/resolvent.hpp"
#include "sev/triple.hpp"

namespace sev {

enum class Scheme { ExplicitEM, PicardEM, ImplicitReference };

const char* to_string(Scheme s);

/// Time-grid trajectory in H coordinates, with the per-step operator
/// evaluations kept for the estimate monitors.
///
/// For the regularized schemes the stored data at step k are
///   resolvent_points[k] = J_lambda(t_k, X_k),
///   drift_evals[k]      = Atilde_lambda(t_k, X_k) = (X_k - J)/lambda,
///   diffusion_evals[k]  = B_lambda(t_k, X_k) = B(t_k, J).
/// The implicit reference stores the drift actually used in the step,
/// A(t_{k+1}, X_{k+1}), and B(t_k, X_k); resolvent_points stays empty.
struct PathSolution {
    Vec times;
    std::vector<Vec> states;
    Scheme scheme = Scheme::ExplicitEM;
    double lambda = 0.0;
    std::vector<Vec> drift_evals;
    std::vector<Mat> diffusion_evals;
    std::vector<Vec> resolvent_points;
    int picard_iterations = 0;

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    bool has_evals() const { return !drift_evals.empty() && !diffusion_evals.empty(); }

    void to_csv(std::ostream& out) const;
    /// Flat binary layout shared with NoisePath: 4 x u64 header
    /// (0, rows, cols, dt bits) then row-major doubles, little-endian.
    void write_binary(const std::string& path) const;
};

struct SolveOptions {
    ResolveOptions resolve;
    double tol_picard = 1e-9;
    int max_picard = 200;
    bool store_evals = true;
    double blowup_threshold = 1e12; // abort when ||X_k||_H exceeds this
};

/// Explicit Euler–Maruyama for the regularized equation:
/// X_{k+1} = X_k + dt (c2 X_k - Atilde_lambda(t_k, X_k)) + B_lambda(t_k, X_k) dW_k.
PathSolution solve_regularized_em(const OperatorPair& pair, const GelfandTriple& triple, double lambda,
                                  const Vec& X0, const NoisePath& noise, const SolveOptions& opts = {});

/// Picard iteration for the same grid functional: iterates the integral map
/// from the constant-X0 path until the sup-in-time H residual is below
/// tol_picard. Fails with PicardDivergenceError when the residual grows three
/// times in a row.
PathSolution solve_regularized_picard(const OperatorPair& pair, const GelfandTriple& triple, double lambda,
                                      const Vec& X0, const NoisePath& noise, const SolveOptions& opts = {});

/// Backward Euler for the original equation, the lambda = 0 target of the
/// sweep: X_{k+1} + dt A(t_{k+1}, X_{k+1}) = X_k + B(t_k, X_k) dW_k.
PathSolution solve_reference_implicit(const OperatorPair& pair, const GelfandTriple& triple, const Vec& X0,
                                      const NoisePath& noise, const SolveOptions& opts = {});

} // namespace sev
