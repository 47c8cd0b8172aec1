#include "sev/integrator.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace sev {

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::ExplicitEM: return "explicit_em";
        case Scheme::PicardEM: return "picard_em";
        case Scheme::ImplicitReference: return "implicit_reference";
    }
    return "?";
}

namespace {

void check_initial(const GelfandTriple& triple, const Vec& X0, const NoisePath& noise,
                   const Diffusion& diffusion) {
    if (X0.size() != triple.dim()) throw InputError("solver: X0 length != triple dim");
    if (!all_finite(X0)) throw InputError("solver: X0 has non-finite entries");
    if (noise.steps < 1) throw InputError("solver: noise path has no steps");
    if (noise.modes != diffusion.modes()) throw InputError("solver: noise modes != diffusion modes");
}

void guard_state(const GelfandTriple& triple, const Vec& x, std::size_t step, double threshold) {
    if (!all_finite(x) || triple.h_norm(x) > threshold)
        throw BlowUpError("solver: state left the admissible region after step " + std::to_string(step),
                          step);
}

std::span<const double> inc_row(const NoisePath& noise, std::size_t k) {
    return {noise.increments.data() + k * noise.modes, noise.modes};
}

} // namespace

PathSolution solve_regularized_em(const OperatorPair& pair, const GelfandTriple& triple, double lambda,
                                  const Vec& X0, const NoisePath& noise, const SolveOptions& opts) {
    if (!(lambda > 0.0)) throw InputError("solve_regularized_em: lambda must be positive");
    check_initial(triple, X0, noise, *pair.diffusion);

    const std::size_t n = triple.dim();
    const std::size_t N = noise.steps;
    const double dt = noise.dt;

    PathSolution path;
    path.scheme = Scheme::ExplicitEM;
    path.lambda = lambda;
    path.times.resize(N + 1);
    path.states.assign(N + 1, Vec(n, 0.0));
    if (opts.store_evals) {
        path.drift_evals.assign(N, Vec(n, 0.0));
        path.diffusion_evals.assign(N, Mat());
        path.resolvent_points.assign(N, Vec(n, 0.0));
    }
    path.states[0] = X0;
    for (std::size_t k = 0; k <= N; ++k) path.times[k] = static_cast<double>(k) * dt;

    Vec x = X0;
    for (std::size_t k = 0; k < N; ++k) {
        const double t = path.times[k];
        ResolventSolution res;
        try {
            res = resolve(pair, triple, lambda, t, x, opts.resolve);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("solve_regularized_em: resolvent failed at step " + std::to_string(k) +
                                       ": " + e.what(),
                                   e.best_residual, e.iterations);
        }
        Vec atilde(n);
        for (std::size_t i = 0; i < n; ++i) atilde[i] = (x[i] - res.point[i]) / lambda;
        const Mat B = eval_diffusion(pair, t, res.point);
        const Vec bdw = apply_hs(B, inc_row(noise, k));

        Vec next(n);
        for (std::size_t i = 0; i < n; ++i)
            next[i] = x[i] + dt * (pair.c2 * x[i] - atilde[i]) + bdw[i];
        guard_state(triple, next, k, opts.blowup_threshold);

        if (opts.store_evals) {
            path.drift_evals[k] = std::move(atilde);
            path.diffusion_evals[k] = B;
            path.resolvent_points[k] = res.point;
        }
        path.states[k + 1] = next;
        x = std::move(next);
    }
    return path;
}

namespace {

// One application of the integral map Gamma. The value at t_k reads the input
// path only at t_j, j < k, so the map is non-anticipating on the grid.
// Returns the drift/diffusion evaluations along the *input* path.
struct PicardSweep {
    std::vector<Vec> out_states;
    std::vector<Vec> atilde;
    std::vector<Mat> bmat;
    std::vector<Vec> jpoint;
};

PicardSweep picard_apply(const OperatorPair& pair, const GelfandTriple& triple, double lambda,
                         const Vec& X0, const NoisePath& noise, const std::vector<Vec>& in_states,
                         const SolveOptions& opts) {
    const std::size_t n = X0.size();
    const std::size_t N = noise.steps;
    const double dt = noise.dt;
    PicardSweep sw;
    sw.out_states.assign(N + 1, Vec(n, 0.0));
    sw.atilde.assign(N, Vec(n, 0.0));
    sw.bmat.assign(N, Mat());
    sw.jpoint.assign(N, Vec(n, 0.0));

    sw.out_states[0] = X0;
    Vec acc = X0;
    for (std::size_t k = 0; k < N; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec& xk = in_states[k];
        const ResolventSolution res = resolve(pair, triple, lambda, t, xk, opts.resolve);
        for (std::size_t i = 0; i < n; ++i) sw.atilde[k][i] = (xk[i] - res.point[i]) / lambda;
        sw.bmat[k] = eval_diffusion(pair, t, res.point);
        sw.jpoint[k] = res.point;
        const Vec bdw = apply_hs(sw.bmat[k], inc_row(noise, k));
        for (std::size_t i = 0; i < n; ++i)
            acc[i] += dt * (pair.c2 * xk[i] - sw.atilde[k][i]) + bdw[i];
        sw.out_states[k + 1] = acc;
    }
    return sw;
}

double sup_h_distance(const GelfandTriple& triple, const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double worst = 0.0;
    Vec d(a[0].size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[k][i] - b[k][i];
        worst = std::max(worst, triple.h_norm(d));
    }
    return worst;
}

} // namespace

PathSolution solve_regularized_picard(const OperatorPair& pair, const GelfandTriple& triple, double lambda,
                                      const Vec& X0, const NoisePath& noise, const SolveOptions& opts) {
    if (!(lambda > 0.0)) throw InputError("solve_regularized_picard: lambda must be positive");
    if (opts.max_picard < 1) throw InputError("solve_regularized_picard: max_picard must be >= 1");
    check_initial(triple, X0, noise, *pair.diffusion);

    const std::size_t N = noise.steps;
    std::vector<Vec> current(N + 1, X0);

    int updates = 0;
    int growth_streak = 0;
    double prev_residual = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep <= opts.max_picard; ++sweep) {
        PicardSweep sw = picard_apply(pair, triple, lambda, X0, noise, current, opts);
        for (const Vec& s : sw.out_states) guard_state(triple, s, N, opts.blowup_threshold);
        const double residual = sup_h_distance(triple, sw.out_states, current);
        if (residual <= opts.tol_picard) {
            // `current` is certified: ||Gamma(current) - current||_sup = residual.
            PathSolution path;
            path.scheme = Scheme::PicardEM;
            path.lambda = lambda;
            path.picard_iterations = updates;
            path.times.resize(N + 1);
            for (std::size_t k = 0; k <= N; ++k) path.times[k] = static_cast<double>(k) * noise.dt;
            path.states = std::move(current);
            if (opts.store_evals) {
                path.drift_evals = std::move(sw.atilde);
                path.diffusion_evals = std::move(sw.bmat);
                path.resolvent_points = std::move(sw.jpoint);
            }
            return path;
        }
        if (residual > prev_residual) {
            if (++growth_streak >= 3)
                throw PicardDivergenceError(
                    "solve_regularized_picard: residual grew three times in a row (" +
                    std::to_string(residual) + "); use a smaller dt or a larger lambda");
        } else {
            growth_streak = 0;
        }
        prev_residual = residual;
        current = std::move(sw.out_states);
        ++updates;
    }
    throw ConvergenceError("solve_regularized_picard: no fixed point within max_picard sweeps",
                           prev_residual, updates);
}

PathSolution solve_reference_implicit(const OperatorPair& pair, const GelfandTriple& triple, const Vec& X0,
                                      const NoisePath& noise, const SolveOptions& opts) {
    check_initial(triple, X0, noise, *pair.diffusion);

    const std::size_t n = triple.dim();
    const std::size_t N = noise.steps;
    const double dt = noise.dt;

    PathSolution path;
    path.scheme = Scheme::ImplicitReference;
    path.lambda = 0.0;
    path.times.resize(N + 1);
    path.states.assign(N + 1, Vec(n, 0.0));
    if (opts.store_evals) {
        path.drift_evals.assign(N, Vec(n, 0.0));
        path.diffusion_evals.assign(N, Mat());
    }
    path.states[0] = X0;
    for (std::size_t k = 0; k <= N; ++k) path.times[k] = static_cast<double>(k) * dt;

    Vec x = X0;
    Vec rhs(n);
    for (std::size_t k = 0; k < N; ++k) {
        const double t_next = path.times[k + 1];
        const Mat B = eval_diffusion(pair, path.times[k], x);
        const Vec bdw = apply_hs(B, inc_row(noise, k));
        for (std::size_t i = 0; i < n; ++i) rhs[i] = x[i] + bdw[i];
        ResolventSolution res;
        try {
            res = solve_shifted(*pair.drift, triple, dt, 0.0, t_next, rhs, opts.resolve);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("solve_reference_implicit: drift solve failed at step " +
                                       std::to_string(k) + ": " + e.what(),
                                   e.best_residual, e.iterations);
        }
        guard_state(triple, res.point, k, opts.blowup_threshold);
        if (opts.store_evals) {
            path.drift_evals[k] = pair.drift->eval(t_next, res.point);
            path.diffusion_evals[k] = B;
        }
        path.states[k + 1] = res.point;
        x = path.states[k + 1];
    }
    return path;
}

void PathSolution::to_csv(std::ostream& out) const {
    const std::size_t n = states.empty() ? 0 : states[0].size();
    out << "t";
    for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
    out << "\n";
    char buf[32];
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", times[k]);
        out << buf;
        for (std::size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", states[k][i]);
            out << ',' << buf;
        }
        out << "\n";
    }
}

void PathSolution::write_binary(const std::string& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("PathSolution::write_binary: cannot open " + file);
    const std::size_t n = states.empty() ? 0 : states[0].size();
    const double dt = times.size() > 1 ? times[1] - times[0] : 0.0;
    auto put = [&](std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        out.write(reinterpret_cast<const char*>(b), 8);
    };
    put(0);
    put(times.size());
    put(n);
    put(std::bit_cast<std::uint64_t>(dt));
    for (const Vec& row : states)
        for (double v : row) put(std::bit_cast<std::uint64_t>(v));
    if (!out) throw InputError("PathSolution::write_binary: write failed for " + file);
}

} // namespace sev
