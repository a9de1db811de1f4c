#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/geometry.hpp"

using namespace cchar;
namespace {

Vec random_point(int dim, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vec x = Vec::NullaryExpr(dim, [&]() { return g(rng); });
    if (x.norm() < 1e-3) x(0) += 1.0;
    return x;
}

// x^2/1 + y^2/r^2 ellipse in R^2 plus a small quartic bump, as a polynomial
// level set F = 1.
ConvexBody perturbed_ellipsoid(double eps) {
    std::vector<std::pair<double, std::vector<int>>> terms = {
        {1.0, {2, 0}},
        {0.5, {0, 2}},
        {eps, {4, 0}},
        {eps, {2, 2}},
        {eps, {0, 4}},
    };
    nlohmann::json spec{{"type", "generic"}, {"n", 1}, {"coeffs", nlohmann::json::array()}};
    for (const auto& [c, p] : terms) {
        spec["coeffs"].push_back({{"c", c}, {"p", p}});
    }
    return ConvexBody::from_json(spec);
}

} // namespace

TEST_CASE("ellipsoid gauge basics") {
    ConvexBody b = ConvexBody::ellipsoid({1.0, 2.0});
    Vec x(4);
    x << 1, 0, 0, 0;
    CHECK(b.gauge(x) == doctest::Approx(1.0));
    x << 0, 2, 0, 0;
    CHECK(b.gauge(x) == doctest::Approx(1.0));
    x << 0, 0, 3, 0;
    CHECK(b.gauge(x) == doctest::Approx(3.0));

    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
        Vec p = random_point(4, rng);
        const double j = b.gauge(p);
        CHECK(b.gauge(Vec(2.5 * p)) == doctest::Approx(2.5 * j).epsilon(1e-12));
        CHECK(b.gauge_grad(p).dot(p) == doctest::Approx(j).epsilon(1e-12));
        Vec y = b.project(p);
        CHECK(b.gauge(y) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((b.gauge_hess(y) * y).cwiseAbs().maxCoeff() < 1e-10);
        // normal normalization N . y = 1
        CHECK(b.normal(y).dot(y) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gauge derivatives match finite differences") {
    std::mt19937_64 rng(11);
    for (ConvexBody b :
         {ConvexBody::ellipsoid({1.0, 1.7}), perturbed_ellipsoid(1e-2)}) {
        const int dim = 2 * b.n();
        for (int k = 0; k < 30; ++k) {
            Vec p = random_point(dim, rng);
            Vec g = b.gauge_grad(p);
            Mat h = b.gauge_hess(p);
            const double step = 1e-6;
            for (int i = 0; i < dim; ++i) {
                Vec e = Vec::Zero(dim);
                e(i) = step;
                double fd = (b.gauge(p + e) - b.gauge(p - e)) / (2 * step);
                CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
                Vec gfd = (b.gauge_grad(p + e) - b.gauge_grad(p - e)) / (2 * step);
                for (int l = 0; l < dim; ++l) {
                    CHECK(h(l, i) == doctest::Approx(gfd(l)).epsilon(2e-5).scale(1.0));
                }
            }
        }
    }
}

TEST_CASE("generic gauge solves the level-set equation") {
    ConvexBody b = perturbed_ellipsoid(1e-3);
    std::mt19937_64 rng(13);
    for (int k = 0; k < 40; ++k) {
        Vec p = random_point(2, rng, 2.0);
        double j = b.gauge(p);
        Vec u = p / j;
        // F(x/j) = 1 defines j
        double f = u(0) * u(0) + 0.5 * u(1) * u(1) +
                   1e-3 * (std::pow(u(0), 4) + u(0) * u(0) * u(1) * u(1) +
                           std::pow(u(1), 4));
        CHECK(f == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("build_phi satisfies the profile contract") {
    PhiFunction phi = build_phi(0.3, 1.9, true);
    CHECK(phi.value(0.0) == doctest::Approx(0.0));
    CHECK(phi.deriv(0.0) == doctest::Approx(0.0));
    CHECK(phi.deriv2(0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi.sigma > 0.0);
    CHECK(phi.T > 1.0);

    // exact power core at the midpoint
    const double mid = 0.5 * (1.0 + phi.T);
    CHECK(phi.value(mid) == doctest::Approx(phi.c * std::pow(mid, phi.alpha))
                                .epsilon(1e-14));
    // on [0,1] the ratio stays above 1 - vartheta (condition for the window)
    for (double t : {0.1, 0.4, 0.7, 0.999}) {
        CHECK(phi.deriv(t) / t > 1.0 - phi.vartheta);
    }
    // strictly decreasing ratio, limit below vartheta (T is huge for alpha
    // near 2, so walk a log-spaced grid)
    double prev = 1e300;
    for (int s = 1; s <= 500; ++s) {
        double t = 1e-3 * std::pow(3.0e3 * phi.T, s / 500.0);
        double ratio = phi.deriv(t) / t;
        CHECK(ratio < prev);
        CHECK(std::min(ratio, phi.deriv2(t)) >= phi.sigma * (1 - 1e-9));
        prev = ratio;
    }
    CHECK(phi.deriv(1000.0 * phi.T) / (1000.0 * phi.T) < phi.vartheta);
    // quadratic tail: constant second derivative past T
    CHECK(phi.deriv2(phi.T + 0.1) ==
          doctest::Approx(phi.deriv2(10 * phi.T)).epsilon(1e-12));

    // inversion of phi'
    for (double target : {1e-4, 0.3, 2.0}) {
        double t = phi.invert_deriv(target);
        CHECK(phi.deriv(t) == doctest::Approx(target).epsilon(1e-11));
    }

    CHECK_THROWS_AS(build_phi(0.5, 1.4, true), RangeError);
    CHECK_NOTHROW(build_phi(0.5, 1.4, false));
    CHECK_THROWS_AS(build_phi(1.5, 1.9, false), RangeError);
    CHECK_THROWS_AS(build_phi(0.1, 2.5, false), RangeError);
    // below alpha = 3 - sqrt(3) the quartic head loses convexity and the
    // construction cannot certify phi'' > 0
    CHECK_THROWS_AS(build_phi(0.5, 1.2, false), InvariantViolation);
}

TEST_CASE("hamiltonian evaluation and bounds") {
    ConvexBody body = ConvexBody::ellipsoid({1.0, 2.0});
    HamiltonianModel ha = HamiltonianModel::homogeneous(body, 1.5);
    std::mt19937_64 rng(17);

    // level set: H_alpha = 1 on Sigma
    for (int k = 0; k < 10; ++k) {
        Vec y = body.project(random_point(4, rng));
        CHECK(hamiltonian_eval(ha, y, false).value == doctest::Approx(1.0));
    }

    PhiFunction phi = build_phi(0.2, 1.8, false);
    HamiltonianModel hs = HamiltonianModel::scaled(body, 5.0, phi);
    CHECK(hs.r > 0.0);
    CHECK(hs.R >= hs.r);

    // gradient vs central differences at 100 random points
    for (int k = 0; k < 100; ++k) {
        Vec x = random_point(4, rng);
        auto ev = hamiltonian_eval(hs, x);
        const double step = 1e-6;
        for (int i = 0; i < 4; ++i) {
            Vec e = Vec::Zero(4);
            e(i) = step;
            double fd = (hamiltonian_eval(hs, x + e, false).value -
                         hamiltonian_eval(hs, x - e, false).value) /
                        (2 * step);
            CHECK(ev.gradient(i) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
        // Hessian quadratic form within the sampled bounds
        Vec xi = random_point(4, rng);
        double q = xi.dot(ev.hessian * xi) / xi.squaredNorm();
        CHECK(q >= hs.r * (1 - 1e-9));
        CHECK(q <= hs.R * (1 + 1e-9));
    }

    CHECK_THROWS_AS(hamiltonian_eval(hs, Vec(Vec::Zero(4))), RangeError);
    CHECK_NOTHROW(hamiltonian_eval(hs, Vec(Vec::Zero(4)), false));
}

TEST_CASE("fenchel dual inverts the gradient") {
    std::mt19937_64 rng(19);
    ConvexBody body = ConvexBody::ellipsoid({1.0, 1.9});
    PhiFunction phi = build_phi(0.2, 1.8, false);
    HamiltonianModel hm = HamiltonianModel::scaled(body, 4.0, phi);
    FenchelDual g = fenchel(hm);

    for (int k = 0; k < 100; ++k) {
        Vec x = random_point(4, rng);
        Vec y = hamiltonian_eval(hm, x, false).gradient;
        Vec back = g.grad(y);
        CHECK((back - x).norm() < 1e-8 * std::max(1.0, x.norm()));
        // Fenchel inequality with equality on the gradient graph
        double hx = hamiltonian_eval(hm, x, false).value;
        CHECK(x.dot(y) == doctest::Approx(hx + g.value(y)).epsilon(1e-10));
        Vec z = random_point(4, rng);
        CHECK(z.dot(y) <= hamiltonian_eval(hm, z, false).value + g.value(y) + 1e-12);
        // G'' = (H'')^{-1} within [1/R, 1/r]
        Mat gh = g.hess(y);
        Vec xi = random_point(4, rng);
        double q = xi.dot(gh * xi) / xi.squaredNorm();
        CHECK(q >= 1.0 / hm.R * (1 - 1e-9));
        CHECK(q <= 1.0 / hm.r * (1 + 1e-9));
    }
}

TEST_CASE("fenchel dual of the homogeneous model on the sphere") {
    ConvexBody sphere = ConvexBody::ellipsoid({1.0});
    HamiltonianModel hm = HamiltonianModel::homogeneous(sphere, 1.5);
    FenchelDual g = fenchel(hm);
    CHECK(g.beta() == doctest::Approx(3.0));

    std::mt19937_64 rng(23);
    for (int k = 0; k < 20; ++k) {
        Vec y = random_point(2, rng);
        // sphere: j'(z) = z on Sigma, so y = mu j'(z) with mu = |y|
        double mu = y.norm();
        CHECK(g.value(y) == doctest::Approx(g.c1() * std::pow(mu, 3.0)));
        Vec x = g.grad(y);
        Vec yy = hamiltonian_eval(hm, x, false).gradient;
        CHECK((yy - y).norm() < 1e-9 * mu);
    }
}

TEST_CASE("generic body fenchel support solve") {
    ConvexBody body = perturbed_ellipsoid(1e-3);
    PhiFunction phi = build_phi(0.2, 1.8, false);
    HamiltonianModel hm = HamiltonianModel::scaled(body, 4.0, phi);
    FenchelDual g = fenchel(hm);
    std::mt19937_64 rng(29);
    for (int k = 0; k < 30; ++k) {
        Vec x = random_point(2, rng);
        Vec y = hamiltonian_eval(hm, x, false).gradient;
        CHECK((g.grad(y) - x).norm() < 1e-8 * std::max(1.0, x.norm()));
    }
}

TEST_CASE("body JSON round trip") {
    ConvexBody b = ConvexBody::ellipsoid({1.0, 2.0, 3.0});
    nlohmann::json j = b.to_json();
    ConvexBody b2 = ConvexBody::from_json(j);
    CHECK(b2.n() == 3);
    CHECK(b2.semi_axes()[1] == doctest::Approx(2.0));

    ConvexBody gb = perturbed_ellipsoid(1e-3);
    nlohmann::json j2 = gb.to_json();
    ConvexBody gb2 = ConvexBody::from_json(j2);
    Vec p(2);
    p << 0.3, -0.8;
    CHECK(gb2.gauge(p) == doctest::Approx(gb.gauge(p)).epsilon(1e-14));

    CHECK_THROWS_AS(ConvexBody::from_json(nlohmann::json{{"type", "cloud"}}),
                    RangeError);
}
