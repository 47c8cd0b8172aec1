#include "sev/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sev {

const char* to_string(ResolveMethod m) {
    switch (m) {
        case ResolveMethod::Newton: return "Newton";
        case ResolveMethod::DampedNewton: return "DampedNewton";
        case ResolveMethod::FixedPoint: return "FixedPoint";
        case ResolveMethod::Bisection: return "Bisection";
    }
    return "?";
}

namespace {

struct Residual {
    Vec value;
    double norm;
};

Residual eval_residual(const Drift& drift, const GelfandTriple& triple, double mu, double shift, double t,
                       std::span<const double> y, const Vec& x) {
    Vec a = drift.eval(t, x);
    Residual r;
    r.value.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r.value[i] = x[i] + mu * (a[i] + shift * x[i]) - y[i];
    r.norm = all_finite(r.value) ? triple.h_norm(r.value) : std::numeric_limits<double>::infinity();
    return r;
}

// Monotone scalar equation: x + mu (a(x) + shift x) = target. Expanding
// bracket plus bisection; always converges for nondecreasing a.
double bisect_component(const Drift& drift, double mu, double shift, double t, double target,
                        std::size_t i) {
    auto F = [&](double v) { return v + mu * (drift.eval_component(t, v, i) + shift * v) - target; };
    double lo = std::min(0.0, target);
    double hi = std::max(0.0, target);
    double width = std::max(1.0, std::abs(target));
    int guard = 0;
    while (F(lo) > 0.0 && guard++ < 2100) {
        lo -= width;
        width *= 2.0;
    }
    width = std::max(1.0, std::abs(target));
    guard = 0;
    while (F(hi) < 0.0 && guard++ < 2100) {
        hi += width;
        width *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (F(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double mid = 0.5 * (lo + hi);
    return std::abs(F(lo)) <= std::abs(F(hi)) ? (std::abs(F(lo)) <= std::abs(F(mid)) ? lo : mid)
                                              : (std::abs(F(hi)) <= std::abs(F(mid)) ? hi : mid);
}

Vec newton_step(const Drift& drift, double mu, double shift, double t, const Vec& x, const Vec& fval) {
    const std::size_t n = x.size();
    static thread_local Mat jac;
    drift.jacobian(t, x, jac);
    const double d0 = 1.0 + mu * shift;
    switch (drift.jacobian_kind()) {
        case JacobianKind::Diagonal: {
            Vec dx(n);
            for (std::size_t i = 0; i < n; ++i) dx[i] = -fval[i] / (d0 + mu * jac(i, i));
            return dx;
        }
        case JacobianKind::Tridiagonal: {
            Vec lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n);
            for (std::size_t i = 0; i < n; ++i) {
                diag[i] = d0 + mu * jac(i, i);
                if (i > 0) lower[i] = mu * jac(i, i - 1);
                if (i + 1 < n) upper[i] = mu * jac(i, i + 1);
                rhs[i] = -fval[i];
            }
            return solve_tridiag(std::move(lower), std::move(diag), std::move(upper), std::move(rhs));
        }
        case JacobianKind::Dense: {
            Mat full(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) full(i, j) = mu * jac(i, j) + (i == j ? d0 : 0.0);
            Vec rhs(n);
            for (std::size_t i = 0; i < n; ++i) rhs[i] = -fval[i];
            return solve_dense(std::move(full), std::move(rhs));
        }
    }
    throw std::logic_error("newton_step: unknown jacobian kind");
}

} // namespace

ResolventSolution solve_shifted(const Drift& drift, const GelfandTriple& triple, double mu, double shift,
                                double t, std::span<const double> y, const ResolveOptions& opts) {
    if (!(mu > 0.0)) throw InputError("solve_shifted: mu must be positive");
    const std::size_t n = y.size();
    if (n != triple.dim()) throw InputError("solve_shifted: dimension mismatch");

    const Vec target(y.begin(), y.end());
    const double tol = opts.tol >= 0.0 ? opts.tol : 1e-10 * std::max(1.0, triple.h_norm(y));

    ResolventSolution sol;
    sol.point = target; // mu -> 0 limit; decent start in every regime used here
    Residual res = eval_residual(drift, triple, mu, shift, t, y, sol.point);
    double best_norm = res.norm;
    Vec best_point = sol.point;
    bool damped = false;

    int it = 0;
    const int newton_budget = std::min(60, opts.max_iterations);
    for (; it < newton_budget && res.norm > tol; ++it) {
        Vec dx;
        bool step_ok = true;
        try {
            dx = newton_step(drift, mu, shift, t, sol.point, res.value);
        } catch (const ConvergenceError&) {
            step_ok = false;
        }
        if (!step_ok || !all_finite(dx)) break;

        double s = 1.0;
        bool accepted = false;
        Vec cand(n);
        while (s >= 1e-6) {
            for (std::size_t i = 0; i < n; ++i) cand[i] = sol.point[i] + s * dx[i];
            Residual cres = eval_residual(drift, triple, mu, shift, t, y, cand);
            if (cres.norm < res.norm * (1.0 - 0.25 * s)) {
                sol.point = cand;
                res = std::move(cres);
                accepted = true;
                break;
            }
            s *= 0.5;
            damped = true;
        }
        if (!accepted) break;
        if (res.norm < best_norm) {
            best_norm = res.norm;
            best_point = sol.point;
        }
    }

    if (res.norm <= tol) {
        sol.residual_h_norm = res.norm;
        sol.iterations = it;
        sol.method_used = damped ? ResolveMethod::DampedNewton : ResolveMethod::Newton;
        return sol;
    }

    // Newton stalled. Separable drifts get the always-convergent per-component
    // bisection; the rest try the contractive fixed-point map.
    if (drift.separable()) {
        for (std::size_t i = 0; i < n; ++i)
            sol.point[i] = bisect_component(drift, mu, shift, t, target[i], i);
        res = eval_residual(drift, triple, mu, shift, t, y, sol.point);
        if (res.norm > best_norm) {
            sol.point = best_point;
            res.norm = best_norm;
        }
        sol.residual_h_norm = res.norm;
        sol.iterations = it + 200;
        sol.method_used = ResolveMethod::Bisection;
        if (res.norm <= tol) return sol;
        throw ConvergenceError("solve_shifted: bisection fallback left residual " +
                                   std::to_string(res.norm) + " above tolerance " + std::to_string(tol),
                               res.norm, sol.iterations);
    }

    // x <- (y - mu A(x)) / (1 + mu shift), contractive while mu L < 1 + mu shift.
    sol.point = best_point;
    res = eval_residual(drift, triple, mu, shift, t, y, sol.point);
    const double denom = 1.0 + mu * shift;
    Vec cand(n);
    for (; it < opts.max_iterations && res.norm > tol; ++it) {
        Vec a = drift.eval(t, sol.point);
        for (std::size_t i = 0; i < n; ++i) cand[i] = (target[i] - mu * a[i]) / denom;
        Residual next = eval_residual(drift, triple, mu, shift, t, y, cand);
        if (!(next.norm < res.norm)) break; // not contracting here
        sol.point = cand;
        res = std::move(next);
        if (res.norm < best_norm) {
            best_norm = res.norm;
            best_point = sol.point;
        }
    }
    if (res.norm <= tol) {
        sol.residual_h_norm = res.norm;
        sol.iterations = it;
        sol.method_used = ResolveMethod::FixedPoint;
        return sol;
    }
    throw ConvergenceError("solve_shifted: iteration cap without meeting tolerance " + std::to_string(tol),
                           best_norm, it);
}

ResolventSolution resolve(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
                          std::span<const double> y, const ResolveOptions& opts) {
    if (!(lambda > 0.0)) throw InputError("resolve: lambda must be positive");
    return solve_shifted(*pair.drift, triple, lambda, pair.c2, t, y, opts);
}

Vec yosida(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
           std::span<const double> x, const ResolveOptions& opts) {
    const ResolventSolution sol = resolve(pair, triple, lambda, t, x, opts);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - sol.point[i]) / lambda;
    return out;
}

Mat regularized_diffusion(const OperatorPair& pair, const GelfandTriple& triple, double lambda, double t,
                          std::span<const double> x, const ResolveOptions& opts) {
    const ResolventSolution sol = resolve(pair, triple, lambda, t, x, opts);
    return eval_diffusion(pair, t, sol.point);
}

} // namespace sev
