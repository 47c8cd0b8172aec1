#include "sev/triple.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sev {

namespace {

// |v|^e with fast paths for the small integer exponents the instances use.
double pow_abs(double v, double e) {
    const double a = std::abs(v);
    if (e == 2.0) return a * a;
    if (e == 1.0) return a;
    if (e == 3.0) return a * a * a;
    if (e == 4.0) return (a * a) * (a * a);
    return std::pow(a, e);
}

// |g|^{p-2} g with the convention phi(0) = 0 (subgradient choice for p < 2).
double signed_power(double g, double p) {
    if (g == 0.0) return 0.0;
    const double m = pow_abs(g, p - 1.0);
    return g > 0.0 ? m : -m;
}

} // namespace

GelfandTriple::GelfandTriple(std::size_t dim, Vec h_weights, double p, VNormSpec vnorm)
    : dim_(dim), w_(std::move(h_weights)), p_(p), vnorm_(vnorm) {
    if (dim_ == 0) throw InputError("GelfandTriple: dim must be positive");
    if (w_.size() != dim_) throw InputError("GelfandTriple: weight vector length != dim");
    for (double w : w_)
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("GelfandTriple: weights must be positive");
    if (!(p_ > 1.0) || !std::isfinite(p_)) throw InputError("GelfandTriple: p must lie in (1, inf)");
    if (vnorm_.kind == VNormKind::DiscreteGradientLp && !(vnorm_.mesh_width > 0.0))
        throw InputError("GelfandTriple: mesh_width must be positive");
    c_emb_ = estimate_embedding_constant(200);
}

void GelfandTriple::check_dim(std::size_t n) const {
    if (n != dim_) throw InputError("GelfandTriple: vector length != dim");
}

double GelfandTriple::pairing(std::span<const double> x, std::span<const double> y) const {
    check_dim(x.size());
    check_dim(y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += w_[i] * x[i] * y[i];
    return s;
}

double GelfandTriple::h_norm_sq(std::span<const double> x) const {
    check_dim(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += w_[i] * x[i] * x[i];
    return s;
}

double GelfandTriple::h_norm(std::span<const double> x) const { return std::sqrt(h_norm_sq(x)); }

double GelfandTriple::v_norm(std::span<const double> x) const {
    check_dim(x.size());
    // Scale out the max entry so large-|x| samples cannot overflow pow().
    if (vnorm_.kind == VNormKind::PlainLp) {
        double scale = 0.0;
        for (double v : x) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) return 0.0;
        double s = 0.0;
        for (double v : x) s += std::pow(std::abs(v) / scale, p_);
        return scale * std::pow(s, 1.0 / p_);
    }
    const double h = vnorm_.mesh_width;
    double scale = 0.0;
    double prev = 0.0;
    for (std::size_t e = 0; e <= dim_; ++e) {
        const double next = (e < dim_) ? x[e] : 0.0;
        scale = std::max(scale, std::abs(next - prev) / h);
        prev = next;
    }
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    prev = 0.0;
    for (std::size_t e = 0; e <= dim_; ++e) {
        const double next = (e < dim_) ? x[e] : 0.0;
        const double g = (next - prev) / h;
        s += h * std::pow(std::abs(g) / scale, p_);
        prev = next;
    }
    return scale * std::pow(s, 1.0 / p_);
}

double GelfandTriple::v_norm_pow(std::span<const double> x) const {
    check_dim(x.size());
    if (vnorm_.kind == VNormKind::PlainLp) {
        double s = 0.0;
        for (double v : x) s += pow_abs(v, p_);
        return s;
    }
    const double h = vnorm_.mesh_width;
    double s = 0.0;
    double prev = 0.0;
    for (std::size_t e = 0; e <= dim_; ++e) {
        const double next = (e < dim_) ? x[e] : 0.0;
        s += h * pow_abs((next - prev) / h, p_);
        prev = next;
    }
    return s;
}

double GelfandTriple::hs_norm_sq(const Mat& B) const {
    if (B.rows != dim_) throw InputError("hs_norm_sq: row count != dim");
    double s = 0.0;
    for (std::size_t i = 0; i < B.rows; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < B.cols; ++j) row += B(i, j) * B(i, j);
        s += w_[i] * row;
    }
    return s;
}

double GelfandTriple::hs_norm(const Mat& B) const { return std::sqrt(hs_norm_sq(B)); }

Vec GelfandTriple::v_norm_gradient(std::span<const double> x) const {
    // Subgradient of ||.||_V at x != 0, in plain coordinates.
    Vec g(dim_, 0.0);
    const double nv = v_norm(x);
    if (nv == 0.0) return g;
    if (vnorm_.kind == VNormKind::PlainLp) {
        const double c = std::pow(nv, 1.0 - p_);
        for (std::size_t i = 0; i < dim_; ++i) g[i] = c * signed_power(x[i], p_);
        return g;
    }
    const double h = vnorm_.mesh_width;
    const double c = std::pow(nv, 1.0 - p_);
    double prev = 0.0;
    Vec phi(dim_ + 1, 0.0);
    for (std::size_t e = 0; e <= dim_; ++e) {
        const double next = (e < dim_) ? x[e] : 0.0;
        phi[e] = signed_power((next - prev) / h, p_);
        prev = next;
    }
    for (std::size_t i = 0; i < dim_; ++i) g[i] = c * (phi[i] - phi[i + 1]);
    return g;
}

namespace {

// Shared ascent loop: maximize num(v)/||v||_V over the V unit sphere with a
// backtracking step; returns the best ratio seen. Deterministic.
template <typename NumFn, typename NumGradFn>
double sphere_ascent(const GelfandTriple& trip, Vec v, NumFn num, NumGradFn num_grad,
                     const std::function<Vec(std::span<const double>)>& vgrad, int iterations) {
    auto normalize = [&](Vec& u) {
        const double nv = trip.v_norm(u);
        if (!(nv > 0.0)) return false;
        for (double& c : u) c /= nv;
        return true;
    };
    if (!normalize(v)) return 0.0;
    double best = num(v);
    if (best < 0.0) {
        for (double& c : v) c = -c;
        best = -best;
    }
    double step = 1.0;
    Vec cand(v.size());
    for (int it = 0; it < iterations; ++it) {
        const Vec gn = num_grad(v);
        const Vec gv = vgrad(v);
        for (std::size_t i = 0; i < v.size(); ++i) cand[i] = v[i] + step * (gn[i] - best * gv[i]);
        Vec trial = cand;
        if (!normalize(trial)) {
            step *= 0.5;
            continue;
        }
        const double val = num(trial);
        if (val > best) {
            best = val;
            v = trial;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
        if (step < 1e-18) break;
    }
    return best;
}

} // namespace

double GelfandTriple::dual_norm_estimate(std::span<const double> xi, int iterations) const {
    check_dim(xi.size());
    if (iterations < 1) throw InputError("dual_norm_estimate: iterations must be >= 1");
    Vec riesz(dim_, 0.0);
    bool zero = true;
    for (std::size_t i = 0; i < dim_; ++i) {
        riesz[i] = w_[i] * xi[i];
        if (riesz[i] != 0.0) zero = false;
    }
    if (zero) return 0.0;
    Vec xi_copy(xi.begin(), xi.end());
    auto num = [&](std::span<const double> v) { return pairing(xi_copy, v); };
    auto num_grad = [&](std::span<const double>) { return riesz; };
    std::function<Vec(std::span<const double>)> vgrad = [&](std::span<const double> v) {
        return v_norm_gradient(v);
    };
    return sphere_ascent(*this, riesz, num, num_grad, vgrad, iterations);
}

double GelfandTriple::estimate_embedding_constant(int iterations) const {
    Vec start(dim_, 1.0);
    auto num = [&](std::span<const double> v) { return h_norm(v); };
    auto num_grad = [&](std::span<const double> v) {
        Vec g(dim_, 0.0);
        const double nh = h_norm(v);
        if (nh == 0.0) return g;
        for (std::size_t i = 0; i < dim_; ++i) g[i] = w_[i] * v[i] / nh;
        return g;
    };
    std::function<Vec(std::span<const double>)> vgrad = [&](std::span<const double> v) {
        return v_norm_gradient(v);
    };
    double best = sphere_ascent(*this, start, num, num_grad, vgrad, iterations);
    // A few basis starts guard against a bad initial direction.
    for (std::size_t k = 0; k < std::min<std::size_t>(dim_, 4); ++k) {
        Vec e(dim_, 0.0);
        e[k] = 1.0;
        best = std::max(best, sphere_ascent(*this, e, num, num_grad, vgrad, iterations));
    }
    return best;
}

bool GelfandTriple::v_equals_h() const {
    if (vnorm_.kind != VNormKind::PlainLp || p_ != 2.0) return false;
    return std::all_of(w_.begin(), w_.end(), [](double w) { return w == 1.0; });
}

} // namespace sev
