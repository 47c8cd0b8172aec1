#pragma once

#include <cstddef>
#include <span>

#include "sev/linalg.hpp"

namespace sev {

enum class VNormKind { PlainLp, DiscreteGradientLp };

struct VNormSpec {
    VNormKind kind = VNormKind::PlainLp;
    double mesh_width = 1.0; // DiscreteGradientLp only
};

/// Coordinate realization of a Gelfand triple V ⊂ H ⊂ V' on R^n.
///
/// H carries the weighted scalar product <x,y> = sum_i w_i x_i y_i. V is
/// either the plain l^p norm or a discrete W^{1,p}_0 gradient norm on a 1-D
/// grid with homogeneous Dirichlet boundary (ghost zeros at both ends). The
/// V–V' duality pairing is identified with the H scalar product, so V'-valued
/// objects are handled through their H coordinates.
class GelfandTriple {
public:
    GelfandTriple(std::size_t dim, Vec h_weights, double p, VNormSpec vnorm);

    std::size_t dim() const { return dim_; }
    double p() const { return p_; }
    double q() const { return p_ / (p_ - 1.0); } // conjugate exponent, 1/p + 1/q = 1
    const Vec& h_weights() const { return w_; }
    const VNormSpec& v_norm_spec() const { return vnorm_; }

    double pairing(std::span<const double> x, std::span<const double> y) const;
    double h_norm_sq(std::span<const double> x) const;
    double h_norm(std::span<const double> x) const;
    double v_norm(std::span<const double> x) const;
    /// ||x||_V^p without the final root; cheaper inside time-integral sums.
    double v_norm_pow(std::span<const double> x) const;

    /// Weighted Hilbert–Schmidt norm (squared) of an n x m coordinate matrix.
    double hs_norm_sq(const Mat& B) const;
    double hs_norm(const Mat& B) const;

    /// Lower bound of ||xi||_{V'} = sup_{v != 0} <xi,v>/||v||_V, computed by
    /// projected gradient ascent over the V unit sphere. Monotone
    /// nondecreasing in `iterations`; never used inside solvers.
    double dual_norm_estimate(std::span<const double> xi, int iterations) const;

    /// Estimated embedding constant: sup ||x||_H / ||x||_V over sampled
    /// ascent directions. Diagnostic metadata, fixed at construction.
    double embedding_constant() const { return c_emb_; }

    /// True when the V norm coincides with the H norm (plain l^2, unit weights).
    bool v_equals_h() const;

private:
    std::size_t dim_;
    Vec w_;
    double p_;
    VNormSpec vnorm_;
    double c_emb_ = 1.0;

    void check_dim(std::size_t n) const;
    Vec v_norm_gradient(std::span<const double> x) const;
    double estimate_embedding_constant(int iterations) const;
};

} // namespace sev
