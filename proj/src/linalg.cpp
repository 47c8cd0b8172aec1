#include "sev/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace sev {

Vec solve_dense(Mat A, Vec b) {
    const std::size_t n = A.rows;
    if (A.cols != n || b.size() != n) throw InputError("solve_dense: shape mismatch");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(A(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            double v = std::abs(A(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            throw ConvergenceError("solve_dense: singular pivot", best, static_cast<int>(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(b[k], b[piv]);
        }
        const double d = A(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = A(i, k) / d;
            if (m == 0.0) continue;
            A(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) A(i, j) -= m * A(k, j);
            b[i] -= m * b[k];
        }
    }

    Vec x(n, 0.0);
    for (std::size_t ir = n; ir-- > 0;) {
        double s = b[ir];
        for (std::size_t j = ir + 1; j < n; ++j) s -= A(ir, j) * x[j];
        x[ir] = s / A(ir, ir);
    }
    return x;
}

Vec solve_tridiag(Vec lower, Vec diag, Vec upper, Vec rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw InputError("solve_tridiag: shape mismatch");

    for (std::size_t i = 1; i < n; ++i) {
        if (!(std::abs(diag[i - 1]) > 0.0))
            throw ConvergenceError("solve_tridiag: zero pivot", 0.0, static_cast<int>(i));
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    Vec x(n, 0.0);
    if (!(std::abs(diag[n - 1]) > 0.0))
        throw ConvergenceError("solve_tridiag: zero pivot", 0.0, static_cast<int>(n));
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t ir = n - 1; ir-- > 0;) x[ir] = (rhs[ir] - upper[ir] * x[ir + 1]) / diag[ir];
    return x;
}

} // namespace sev
