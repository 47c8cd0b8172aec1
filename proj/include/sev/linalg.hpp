#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sev/errors.hpp"

namespace sev {

using Vec = std::vector<double>;

/// Dense row-major matrix, sized for the small state dimensions used here.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Vec matvec(const Mat& A, std::span<const double> x) {
    if (x.size() != A.cols) throw InputError("matvec: shape mismatch");
    Vec y(A.rows, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < A.cols; ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

/// Solve A x = b by LU with partial pivoting. A and b are taken by value;
/// throws ConvergenceError on a (numerically) singular pivot.
Vec solve_dense(Mat A, Vec b);

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are ignored.
Vec solve_tridiag(Vec lower, Vec diag, Vec upper, Vec rhs);

} // namespace sev
