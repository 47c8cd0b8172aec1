#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sev/noise.hpp"
#include "sev/resolvent.hpp"

using namespace sev;

namespace {

GelfandTriple plain_lp(std::size_t dim, double p) {
    return GelfandTriple(dim, Vec(dim, 1.0), p, {VNormKind::PlainLp, 1.0});
}

OperatorPair linear_pair(std::size_t n, double a, double sigma, double c2 = 0.0) {
    OperatorPair pair;
    pair.drift = std::make_shared<LinearDrift>(a);
    pair.diffusion = sigma == 0.0
                         ? std::shared_ptr<const Diffusion>(std::make_shared<ZeroDiffusion>(n, 1))
                         : std::shared_ptr<const Diffusion>(
                               std::make_shared<MultiplicativeScalarDiffusion>(sigma, n, 1));
    pair.c1 = a - 0.5 * sigma * sigma;
    pair.c2 = c2;
    pair.p = 2.0;
    return pair;
}

OperatorPair power_pair(std::size_t n, double p) {
    OperatorPair pair;
    pair.drift = std::make_shared<ScalarPowerDrift>(p);
    pair.diffusion = std::make_shared<ZeroDiffusion>(n, 1);
    pair.c1 = 1.0;
    pair.p = p;
    return pair;
}

OperatorPair plap_pair(std::size_t n, double p, double h, double sigma) {
    OperatorPair pair;
    pair.drift = std::make_shared<PLaplacianDrift>(p, h);
    pair.diffusion = std::make_shared<MultiplicativeScalarDiffusion>(sigma, n, n / 2);
    pair.c1 = 1.0;
    pair.c2 = 0.5 * sigma * sigma;
    pair.p = p;
    return pair;
}

GelfandTriple plap_triple(std::size_t n, double p, double h) {
    return GelfandTriple(n, Vec(n, h), p, {VNormKind::DiscreteGradientLp, h});
}

} // namespace

TEST_CASE("resolve: closed-form linear case") {
    const auto trip = plain_lp(2, 2.0);
    const OperatorPair pair = linear_pair(2, 2.0, 0.0);
    const ResolventSolution sol = resolve(pair, trip, 1.0, 0.0, Vec{6.0, 0.0});
    CHECK(sol.point[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sol.point[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.residual_h_norm <= 1e-10 * 6.0);
    CHECK(sol.method_used == ResolveMethod::Newton);
    CHECK(std::string(to_string(sol.method_used)) == "Newton");
}

TEST_CASE("returned residual meets the default tolerance on every instance") {
    struct Case {
        OperatorPair pair;
        GelfandTriple trip;
    };
    std::vector<Case> cases;
    cases.push_back({linear_pair(3, 2.0, 0.5), plain_lp(3, 2.0)});
    cases.push_back({power_pair(3, 4.0), plain_lp(3, 4.0)});
    cases.push_back({power_pair(3, 1.5), plain_lp(3, 1.5)});
    cases.push_back({plap_pair(6, 3.0, 1.0 / 7.0, 0.5), plap_triple(6, 3.0, 1.0 / 7.0)});
    for (const auto& c : cases) {
        CounterRng rng(606);
        const std::size_t n = c.trip.dim();
        for (int s = 0; s < 400; ++s) {
            const double lam = std::pow(10.0, 4.0 * rng.next_uniform() - 3.0);
            Vec y(n);
            for (double& v : y) v = 20.0 * rng.next_normal();
            const ResolventSolution sol = resolve(c.pair, c.trip, lam, 0.0, y);
            CHECK(sol.residual_h_norm <= 1e-10 * std::max(1.0, c.trip.h_norm(y)));
        }
    }
}

TEST_CASE("resolve: scalar cubic case 1 + 1 = 2") {
    const auto trip = plain_lp(1, 4.0);
    const OperatorPair pair = power_pair(1, 4.0);
    const ResolventSolution sol = resolve(pair, trip, 1.0, 0.0, Vec{2.0});
    CHECK(sol.point[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("resolve: lambda -> 0 forces J -> y") {
    const auto trip = plain_lp(3, 2.0);
    const OperatorPair pair = linear_pair(3, 1.5, 0.0);
    const Vec y{1.0, -2.0, 0.5};
    double prev = 1e300;
    for (double lam = 1.0; lam >= 1.0 / 1024.0; lam *= 0.5) {
        const ResolventSolution sol = resolve(pair, trip, lam, 0.0, y);
        Vec d(3);
        for (int i = 0; i < 3; ++i) d[i] = sol.point[i] - y[i];
        const double gap = trip.h_norm(d);
        CHECK(gap <= prev + 2e-10);
        prev = gap;
    }
    CHECK(prev <= 1e-2);
}

TEST_CASE("resolve honors the c2 shift") {
    // x + lambda (a x + c2 x) = y  =>  x = y / (1 + lambda (a + c2))
    const auto trip = plain_lp(1, 2.0);
    const OperatorPair pair = linear_pair(1, 2.0, 0.0, 0.5);
    const ResolventSolution sol = resolve(pair, trip, 2.0, 0.0, Vec{3.0});
    CHECK(sol.point[0] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("yosida examples") {
    const auto trip2 = plain_lp(2, 2.0);
    const OperatorPair lin = linear_pair(2, 2.0, 0.0);
    const Vec out = yosida(lin, trip2, 1.0, 0.0, Vec{6.0, 0.0});
    CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-12));

    const auto trip1 = plain_lp(1, 4.0);
    const OperatorPair cub = power_pair(1, 4.0);
    CHECK(yosida(cub, trip1, 1.0, 0.0, Vec{2.0})[0] == doctest::Approx(1.0).epsilon(1e-12));
    // fixed point of the resolvent: Atilde(0) = 0
    CHECK(yosida(cub, trip1, 0.25, 0.0, Vec{0.0})[0] == 0.0);
}

TEST_CASE("regularized diffusion examples") {
    const auto trip = plain_lp(2, 2.0);

    Mat G0(2, 1);
    G0(0, 0) = 0.4;
    G0(1, 0) = -0.1;
    OperatorPair additive = linear_pair(2, 2.0, 0.0);
    additive.diffusion = std::make_shared<AdditiveDiffusion>(G0);
    CHECK(regularized_diffusion(additive, trip, 0.5, 0.0, Vec{9.0, -3.0}).a == G0.a);

    const OperatorPair gbm = linear_pair(2, 2.0, 0.5);
    const Mat B = regularized_diffusion(gbm, trip, 1.0, 0.0, Vec{6.0, 0.0});
    CHECK(B(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(B(1, 0) == doctest::Approx(0.0).epsilon(1e-12));

    // lambda -> 0: B_lambda(x) -> B(x)
    const Vec x{1.5, -0.5};
    const Mat direct = eval_diffusion(gbm, 0.0, x);
    const Mat blam = regularized_diffusion(gbm, trip, 1e-8, 0.0, x);
    for (std::size_t i = 0; i < direct.a.size(); ++i)
        CHECK(blam.a[i] == doctest::Approx(direct.a[i]).epsilon(1e-6));
}

TEST_CASE("contraction of the resolvent over random inputs") {
    struct Case {
        OperatorPair pair;
        GelfandTriple trip;
    };
    std::vector<Case> cases;
    cases.push_back({linear_pair(3, 2.0, 0.5), plain_lp(3, 2.0)});
    cases.push_back({power_pair(3, 4.0), plain_lp(3, 4.0)});
    cases.push_back({plap_pair(6, 3.0, 1.0 / 7.0, 0.5), plap_triple(6, 3.0, 1.0 / 7.0)});

    for (const auto& c : cases) {
        CounterRng rng(808);
        const std::size_t n = c.trip.dim();
        for (int s = 0; s < 1000; ++s) {
            const double lam = std::pow(10.0, 2.0 * rng.next_uniform() - 1.5); // [0.03, 3]
            Vec x(n), y(n), d(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = 5.0 * rng.next_normal();
                y[i] = 5.0 * rng.next_normal();
                d[i] = x[i] - y[i];
            }
            const ResolventSolution jx = resolve(c.pair, c.trip, lam, 0.2, x);
            const ResolventSolution jy = resolve(c.pair, c.trip, lam, 0.2, y);
            Vec jd(n);
            for (std::size_t i = 0; i < n; ++i) jd[i] = jx.point[i] - jy.point[i];
            const double slack = jx.residual_h_norm + jy.residual_h_norm;
            CHECK(c.trip.h_norm(jd) <= c.trip.h_norm(d) + 2.0 * std::max(slack, 1e-10));
        }
    }
}

TEST_CASE("yosida map is 1/lambda Lipschitz") {
    const auto trip = plain_lp(4, 4.0);
    const OperatorPair pair = power_pair(4, 4.0);
    CounterRng rng(909);
    for (int s = 0; s < 1000; ++s) {
        const double lam = std::pow(4.0, 2.0 * rng.next_uniform() - 1.0);
        Vec x(4), y(4), d(4);
        for (int i = 0; i < 4; ++i) {
            x[i] = 3.0 * rng.next_normal();
            y[i] = 3.0 * rng.next_normal();
            d[i] = x[i] - y[i];
        }
        ResolveOptions tight;
        tight.tol = 1e-13 * std::max({1.0, trip.h_norm(x), trip.h_norm(y)});
        const Vec ax = yosida(pair, trip, lam, 0.0, x, tight);
        const Vec ay = yosida(pair, trip, lam, 0.0, y, tight);
        Vec ad(4);
        for (int i = 0; i < 4; ++i) ad[i] = ax[i] - ay[i];
        const double slack = 2.0 * tight.tol / lam;
        CHECK(trip.h_norm(ad) <= trip.h_norm(d) / lam + slack);
    }
}

TEST_CASE("regularized diffusion estimate 1/lambda") {
    const std::size_t n = 6;
    const double h = 1.0 / 7.0;
    const OperatorPair pair = plap_pair(n, 3.0, h, 0.5);
    const auto trip = plap_triple(n, 3.0, h);
    CounterRng rng(1010);
    for (int s = 0; s < 500; ++s) {
        const double lam = std::pow(8.0, 2.0 * rng.next_uniform() - 1.0);
        Vec x(n), y(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = 2.0 * rng.next_normal();
            y[i] = 2.0 * rng.next_normal();
            d[i] = x[i] - y[i];
        }
        const Mat bx = regularized_diffusion(pair, trip, lam, 0.0, x);
        const Mat by = regularized_diffusion(pair, trip, lam, 0.0, y);
        Mat bd(bx.rows, bx.cols);
        for (std::size_t i = 0; i < bx.a.size(); ++i) bd.a[i] = bx.a[i] - by.a[i];
        const double lhs = 0.5 * trip.hs_norm_sq(bd);
        const double rhs = trip.h_norm_sq(d) / lam;
        CHECK(lhs <= rhs * (1.0 + 1e-8) + 1e-9);
    }
}

TEST_CASE("identity (yo): <Al x, x> = <A J x, J x> + lambda ||Al x||^2") {
    struct Case {
        OperatorPair pair;
        GelfandTriple trip;
    };
    std::vector<Case> cases;
    cases.push_back({linear_pair(3, 2.0, 0.5), plain_lp(3, 2.0)});
    cases.push_back({power_pair(2, 4.0), plain_lp(2, 4.0)});
    cases.push_back({plap_pair(6, 3.0, 1.0 / 7.0, 0.5), plap_triple(6, 3.0, 1.0 / 7.0)});

    for (const auto& c : cases) {
        CounterRng rng(111);
        const std::size_t n = c.trip.dim();
        for (int s = 0; s < 1000; ++s) {
            const double lam = std::pow(10.0, 2.0 * rng.next_uniform() - 1.5);
            Vec x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = 4.0 * rng.next_normal();
            ResolveOptions tight;
            tight.tol = 1e-13 * c.trip.h_norm(x);
            const ResolventSolution sol = resolve(c.pair, c.trip, lam, 0.1, x, tight);
            Vec al(n);
            for (std::size_t i = 0; i < n; ++i) al[i] = (x[i] - sol.point[i]) / lam;
            Vec aj = c.pair.drift->eval(0.1, sol.point);
            for (std::size_t i = 0; i < n; ++i) aj[i] += c.pair.c2 * sol.point[i];

            const double lhs = c.trip.pairing(al, x);
            const double rhs =
                c.trip.pairing(aj, sol.point) + lam * c.trip.h_norm_sq(al);
            const double scale =
                std::abs(lhs) + std::abs(c.trip.pairing(aj, sol.point)) + lam * c.trip.h_norm_sq(al);
            CHECK(std::abs(lhs - rhs) <= 1e-8 * scale + 1e-12);
        }
    }
}

TEST_CASE("pointwise resolvent convergence is monotone down the lambda ladder") {
    const std::size_t n = 6;
    const double h = 1.0 / 7.0;
    const OperatorPair pair = plap_pair(n, 3.0, h, 0.0);
    const auto trip = plap_triple(n, 3.0, h);
    CounterRng rng(222);
    for (int s = 0; s < 50; ++s) {
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = 2.0 * rng.next_normal();
        double prev = 1e300;
        for (double lam = 1.0; lam >= 1.0 / 256.0; lam *= 0.5) {
            const ResolventSolution sol = resolve(pair, trip, lam, 0.0, x);
            Vec d(n);
            for (std::size_t i = 0; i < n; ++i) d[i] = sol.point[i] - x[i];
            const double gap = trip.h_norm(d);
            CHECK(gap <= prev + 1e-9);
            prev = gap;
        }
    }
}

TEST_CASE("Newton agrees with scalar bisection to 1e-12") {
    for (double p : {4.0, 1.5}) {
        const auto trip = plain_lp(1, p);
        const OperatorPair pair = power_pair(1, p);
        CounterRng rng(333);
        for (int s = 0; s < 300; ++s) {
            const double lam = std::pow(10.0, 2.0 * rng.next_uniform() - 1.0);
            const double y = 30.0 * rng.next_normal();
            ResolveOptions tight;
            tight.tol = 1e-14 * std::max(1.0, std::abs(y));
            const ResolventSolution sol = resolve(pair, trip, lam, 0.0, Vec{y}, tight);
            auto F = [&](double v) {
                const double m = std::pow(std::abs(v), p - 1.0);
                return v + lam * (v > 0 ? m : (v < 0 ? -m : 0.0)) - y;
            };
            const double ref = oracle::bisect_monotone(F, y);
            CHECK(std::abs(sol.point[0] - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("resolve rejects bad lambda and reports tolerance failures") {
    const auto trip = plain_lp(1, 2.0);
    const OperatorPair lin = linear_pair(1, 1.0, 0.0);
    CHECK_THROWS_AS((void)resolve(lin, trip, 0.0, 0.0, Vec{1.0}), InputError);
    CHECK_THROWS_AS((void)resolve(lin, trip, -1.0, 0.0, Vec{1.0}), InputError);

    // x + lambda sign(x) = y has no solution for 0 < y < lambda: the graph
    // jumps over y. Every solver route must give up and report its best.
    OperatorPair sign;
    sign.drift = std::make_shared<SignDrift>();
    sign.diffusion = std::make_shared<ZeroDiffusion>(1, 1);
    bool threw = false;
    try {
        (void)resolve(sign, trip, 1.0, 0.0, Vec{0.5});
    } catch (const ConvergenceError& e) {
        threw = true;
        CHECK(e.best_residual > 0.0);
        CHECK(e.iterations > 0);
    }
    CHECK(threw);
}

TEST_CASE("solve_shifted handles mu without shift (backward Euler building block)") {
    const auto trip = plain_lp(1, 4.0);
    const ScalarPowerDrift cubic(4.0);
    // x + dt x^3 = 1 with dt = 1: the real root of x^3 + x - 1.
    const ResolventSolution sol = solve_shifted(cubic, trip, 1.0, 0.0, 0.0, Vec{1.0});
    auto F = [](double v) { return v * v * v + v - 1.0; };
    const double ref = oracle::bisect_monotone(F, 1.0);
    CHECK(sol.point[0] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(sol.point[0] == doctest::Approx(0.6823278).epsilon(1e-6));
}
