#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/orbits.hpp"

using namespace cchar;
namespace {

constexpr double kPi = std::numbers::pi;
const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

ConvexBody perturbed_ellipsoid(double eps) {
    nlohmann::json spec{{"type", "generic"},
                        {"n", 1},
                        {"coeffs", nlohmann::json::array()}};
    for (const auto& [c, p] :
         std::vector<std::pair<double, std::vector<int>>>{
             {1.0, {2, 0}}, {1.0, {0, 2}}, {eps, {4, 0}}, {eps, {0, 4}}}) {
        spec["coeffs"].push_back({{"c", c}, {"p", p}});
    }
    return ConvexBody::from_json(spec);
}

} // namespace

TEST_CASE("ellipsoid orbit enumeration") {
    auto one = ellipsoid_orbits(ConvexBody::ellipsoid({1.0}));
    REQUIRE(one.size() == 1);
    CHECK(one[0].tau == doctest::Approx(2 * kPi).epsilon(1e-12));
    CHECK(one[0].residual <= 1e-12);

    const double r2 = std::sqrt(2.0) * kGolden;
    auto body = ConvexBody::ellipsoid({1.0, r2});
    auto orbits = ellipsoid_orbits(body);
    REQUIRE(orbits.size() == 2);
    CHECK(orbits[0].tau == doctest::Approx(2 * kPi).epsilon(1e-12));
    CHECK(orbits[1].tau == doctest::Approx(2 * kPi * r2 * r2).epsilon(1e-12));
    for (const auto& o : orbits) {
        CHECK(o.residual <= 1e-10);
        CHECK_NOTHROW(validate_orbit(body, o));
        // planar circle: exactly two coordinates active
        for (const Vec& p : o.points) {
            CHECK(p.cwiseAbs().maxCoeff() <= r2 + 1e-12);
        }
    }

    // rational squared-axis ratio: a continuum of orbits, enumeration refused
    CHECK_THROWS_AS(ellipsoid_orbits(ConvexBody::ellipsoid({1.0, std::sqrt(2.0)})),
                    RangeError);
    CHECK_THROWS_AS(ellipsoid_orbits(perturbed_ellipsoid(1e-3)), RangeError);
}

TEST_CASE("fourier loop calculus") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    FourierLoop l(2, 4);
    for (int k = -4; k <= 4; ++k) {
        if (k == 0) continue;
        l.coeff(k) = Vec::NullaryExpr(4, [&]() { return g(rng); });
    }
    // primitive differentiates back to the loop value
    const double h = 1e-6;
    for (double t : {0.0, 0.17, 0.5, 0.93}) {
        Vec fd = (l.primitive(t + h) - l.primitive(t - h)) / (2 * h);
        CHECK((fd - l.value(t)).norm() <= 1e-7 * (1 + l.value(t).norm()));
    }
    // value and primitive both have zero mean; norm2 matches quadrature
    const int m = 4096;
    Vec mean_u = Vec::Zero(4), mean_p = Vec::Zero(4);
    double q = 0.0;
    for (int i = 0; i < m; ++i) {
        const double t = static_cast<double>(i) / m;
        mean_u += l.value(t) / m;
        mean_p += l.primitive(t) / m;
        q += l.value(t).squaredNorm() / m;
    }
    CHECK(mean_u.norm() <= 1e-12);
    CHECK(mean_p.norm() <= 1e-12);
    CHECK(q == doctest::Approx(l.norm2()).epsilon(1e-10));

    CHECK_THROWS_AS(l.coeff(0), RangeError);
    CHECK_THROWS_AS(l.coeff(5), RangeError);
}

TEST_CASE("shooting recovers the analytic circle") {
    const double r2 = std::sqrt(2.0) * kGolden;
    auto body = ConvexBody::ellipsoid({1.0, r2});

    Vec seed = Vec::Zero(4);
    seed(0) = 1.0;
    auto orbit = shoot(body, seed, 10.0);
    REQUIRE(orbit.has_value());
    CHECK(orbit->tau == doctest::Approx(2 * kPi).epsilon(1e-9));
    CHECK_NOTHROW(validate_orbit(body, *orbit));
    CHECK(orbit->source == ClosedCharacteristic::Source::Shooting);

    Vec seed2 = Vec::Zero(4);
    seed2(1) = r2;
    auto orbit2 = shoot(body, seed2, 40.0);
    REQUIRE(orbit2.has_value());
    CHECK(orbit2->tau == doctest::Approx(2 * kPi * r2 * r2).epsilon(1e-9));
}

TEST_CASE("shooting: quasi-periodic seed never closes") {
    const double r2 = std::sqrt(2.0) * kGolden;
    auto body = ConvexBody::ellipsoid({1.0, r2});
    Vec seed(4);
    seed << 0.6, 0.7, 0.3, -0.4;
    seed = body.project(seed);
    const double t_max = 10.0 * 2 * kPi * r2 * r2;
    CHECK_FALSE(shoot(body, seed, t_max).has_value());
}

TEST_CASE("shooting on a perturbed ellipsoid") {
    auto body = perturbed_ellipsoid(1e-3);
    Vec seed(2);
    seed << 1.0, 0.0;
    seed = body.project(seed);
    auto orbit = shoot(body, seed, 15.0);
    REQUIRE(orbit.has_value());
    CHECK(orbit->residual <= 1e-7);
    CHECK_NOTHROW(validate_orbit(body, *orbit));
    // quartic perturbation shrinks the gauge ball, shortening the period
    CHECK(orbit->tau < 2 * kPi);
    CHECK(orbit->tau > 0.9 * 2 * kPi);
}

TEST_CASE("shooting rejects seeds far from the surface") {
    auto body = ConvexBody::ellipsoid({1.0, std::sqrt(2.0) * kGolden});
    Vec seed = Vec::Zero(4);
    seed(0) = 1.5;
    CHECK_THROWS_AS(shoot(body, seed, 5.0), RangeError);
}

TEST_CASE("dual action recovers analytic orbits") {
    auto body = ConvexBody::ellipsoid({1.0, kGolden});
    const double tau_max = 2 * kPi * kGolden * kGolden;
    const double a = 3.0 * tau_max;
    const double vartheta = 0.9 * (2 * kPi) / a;
    auto phi = build_phi(vartheta, 1.5, false);
    auto hm = HamiltonianModel::scaled(body, a, phi);

    // seed in the (0, 2) plane: descend to the short orbit
    FourierLoop loop0(2, 8);
    loop0.coeff(1) = Vec::Zero(4);
    loop0.coeff(1)(2) = 0.1;
    auto res = dual_action(hm, loop0);
    REQUIRE(res.has_value());
    CHECK(res->action < 0.0);
    CHECK(res->orbit.tau == doctest::Approx(2 * kPi).epsilon(1e-6));
    CHECK_NOTHROW(validate_orbit(body, res->orbit));

    // doubling the truncation must not move the period
    FourierLoop loop0w(2, 16);
    loop0w.coeff(1) = loop0.coeff(1);
    auto resw = dual_action(hm, loop0w);
    REQUIRE(resw.has_value());
    CHECK(std::abs(resw->orbit.tau - res->orbit.tau) <= 1e-8 * res->orbit.tau);

    // seed in the (1, 3) plane: the long orbit's critical point
    FourierLoop loop1(2, 8);
    loop1.coeff(1) = Vec::Zero(4);
    loop1.coeff(1)(3) = 0.1;
    auto res1 = dual_action(hm, loop1);
    REQUIRE(res1.has_value());
    CHECK(res1->action < 0.0);
    CHECK(res1->orbit.tau == doctest::Approx(tau_max).epsilon(1e-6));
}

TEST_CASE("dual action: tiny seeds collapse to the trivial loop") {
    auto body = ConvexBody::ellipsoid({1.0, kGolden});
    const double a = 3.0 * 2 * kPi * kGolden * kGolden;
    auto phi = build_phi(0.9 * (2 * kPi) / a, 1.5, false);
    auto hm = HamiltonianModel::scaled(body, a, phi);
    FourierLoop loop0(2, 8);
    loop0.coeff(1) = Vec::Zero(4);
    loop0.coeff(1)(2) = 1e-12;
    CHECK_FALSE(dual_action(hm, loop0).has_value());
}

TEST_CASE("deduplication groups point sets and annotates iterates") {
    const double r2 = std::sqrt(2.0) * kGolden;
    auto body = ConvexBody::ellipsoid({1.0, r2});
    auto orbits = ellipsoid_orbits(body);

    // a 2nd iterate of the short orbit, tagged as a shooting result
    ClosedCharacteristic twice = orbits[0];
    twice.source = ClosedCharacteristic::Source::Shooting;
    twice.tau *= 2.0;
    auto times = twice.times;
    auto pts = twice.points;
    for (std::size_t i = 1; i < times.size(); ++i) {
        twice.times.push_back(orbits[0].tau + times[i]);
        twice.points.push_back(pts[i]);
    }
    // a shooting duplicate of the short orbit itself
    ClosedCharacteristic dup = orbits[0];
    dup.source = ClosedCharacteristic::Source::Shooting;

    auto merged = deduplicate({orbits[0], orbits[1], twice, dup});
    REQUIRE(merged.size() == 3);
    CHECK(merged[0].tau == doctest::Approx(orbits[0].tau));
    CHECK(merged[0].multiplicity == 1);
    CHECK(merged[0].source == ClosedCharacteristic::Source::Analytic);
    CHECK(merged[1].tau == doctest::Approx(2 * orbits[0].tau));
    CHECK(merged[1].multiplicity == 2);
    CHECK(merged[2].tau == doctest::Approx(orbits[1].tau));
    CHECK(merged[2].multiplicity == 1);

    // a half-integer period ratio cannot be attributed to an iterate
    ClosedCharacteristic odd = orbits[0];
    odd.tau *= 2.5;
    CHECK_THROWS_AS(deduplicate({orbits[0], odd}), ConsistencyError);
}

TEST_CASE("orbit json round trip") {
    auto body = ConvexBody::ellipsoid({1.0, std::sqrt(2.0) * kGolden});
    auto orbits = ellipsoid_orbits(body);
    auto j = orbits[1].to_json();
    auto back = ClosedCharacteristic::from_json(j);
    CHECK(back.tau == orbits[1].tau);
    CHECK(back.source == orbits[1].source);
    CHECK(back.multiplicity == orbits[1].multiplicity);
    REQUIRE(back.points.size() == orbits[1].points.size());
    for (std::size_t i = 0; i < back.points.size(); ++i) {
        CHECK((back.points[i] - orbits[1].points[i]).norm() == 0.0);
    }
    CHECK_NOTHROW(validate_orbit(body, back));
}
