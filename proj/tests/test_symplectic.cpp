#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "cchar/symplectic.hpp"

using namespace cchar;
namespace {

constexpr double kPi = std::numbers::pi;

Mat rot2(double theta) {
    Mat m(2, 2);
    m << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return m;
}

// Random symplectic matrix as a product of exponentials of J*S with S symmetric.
Mat random_symplectic(int n, std::mt19937_64& rng, int factors = 3) {
    std::normal_distribution<double> g(0.0, 0.4);
    const Mat j = standard_J(n);
    Mat acc = Mat::Identity(2 * n, 2 * n);
    for (int f = 0; f < factors; ++f) {
        Mat s = Mat::NullaryExpr(2 * n, 2 * n, [&]() { return g(rng); });
        s = ((s + s.transpose()) / 2.0).eval();
        Mat k = j * s;
        // exp via scaling and squaring on a small matrix
        Mat e = Mat::Identity(2 * n, 2 * n);
        Mat term = Mat::Identity(2 * n, 2 * n);
        for (int p = 1; p <= 24; ++p) {
            term = (term * k / static_cast<double>(p)).eval();
            e += term;
        }
        acc = acc * e;
    }
    return acc;
}

} // namespace

TEST_CASE("standard J squares to -I and has the right blocks") {
    for (int n : {1, 2, 3}) {
        Mat j = standard_J(n);
        CHECK((j * j + Mat::Identity(2 * n, 2 * n)).norm() == doctest::Approx(0.0));
        CHECK(j(0, n) == -1.0);
        CHECK(j(n, 0) == 1.0);
    }
}

TEST_CASE("constructor rejects non-symplectic input") {
    Mat bad = Mat::Identity(2, 2) * 2.0;
    CHECK_THROWS_AS((SymplecticMatrix{bad}), InvariantViolation);
    CHECK_THROWS_AS((SymplecticMatrix{Mat::Identity(3, 3)}), RangeError);
}

TEST_CASE("inverse and products stay symplectic") {
    std::mt19937_64 rng(7);
    for (int n : {1, 2, 3}) {
        SymplecticMatrix m(random_symplectic(n, rng), 1e-8);
        SymplecticMatrix mi = m.inverse();
        CHECK((m.entries() * mi.entries() - Mat::Identity(2 * n, 2 * n)).norm() <
              1e-9);
        CHECK(symplectic_defect((m * m).entries()) < 1e-8);
    }
}

TEST_CASE("diamond of identities is the identity") {
    SymplecticMatrix i1 = SymplecticMatrix::identity(1);
    SymplecticMatrix d = diamond(i1, i1);
    CHECK((d.entries() - Mat::Identity(4, 4)).norm() == doctest::Approx(0.0));
}

TEST_CASE("diamond interleaves blocks") {
    double theta = 0.7, phi = 2.2;
    Mat d = diamond(rot2(theta), rot2(phi));
    Mat expect(4, 4);
    expect << std::cos(theta), 0, -std::sin(theta), 0,
              0, std::cos(phi), 0, -std::sin(phi),
              std::sin(theta), 0, std::cos(theta), 0,
              0, std::sin(phi), 0, std::cos(phi);
    CHECK((d - expect).norm() == doctest::Approx(0.0));
}

TEST_CASE("diamond is associative and multiplicative") {
    std::mt19937_64 rng(11);
    Mat a = random_symplectic(1, rng), b = random_symplectic(2, rng),
        c = random_symplectic(1, rng);
    CHECK((diamond(diamond(a, b), c) - diamond(a, diamond(b, c))).norm() < 1e-12);
    Mat a2 = random_symplectic(1, rng), b2 = random_symplectic(2, rng);
    CHECK((diamond(a * a2, b * b2) - diamond(a, b) * diamond(a2, b2)).norm() <
          1e-10);
    CHECK(symplectic_defect(diamond(a, b)) < 1e-10);
}

TEST_CASE("nu_omega on reference matrices") {
    Tolerances tol;
    CHECK(nu_omega(Mat::Identity(2, 2), Complex(1, 0), tol) == 2);
    CHECK(nu_omega(realize(BasicNormalForm::N1(1, 1)), Complex(1, 0), tol) == 1);
    double theta = 2.0 * kPi * (std::sqrt(5.0) - 1.0) / 2.0;
    while (theta >= 2 * kPi) theta -= 2 * kPi;
    Complex om(std::cos(theta), std::sin(theta));
    CHECK(nu_omega(rot2(theta), om, tol) == 1);
    CHECK(nu_omega(rot2(theta), Complex(1, 0), tol) == 0);
    CHECK_THROWS_AS(nu_omega(rot2(theta), Complex(2, 0), tol), RangeError);
}

TEST_CASE("d_omega values and vanishing locus") {
    Tolerances tol;
    // n = 1: D_omega(M) = conj(omega) det(M - omega I).
    CHECK(d_omega(Mat::Identity(2, 2), Complex(-1, 0), tol) ==
          doctest::Approx(-4.0));
    for (double theta : {0.3, 1.2, 2.9}) {
        CHECK(d_omega(rot2(theta), Complex(1, 0), tol) ==
              doctest::Approx(2.0 * (1.0 - std::cos(theta))));
    }
    // Hyperbolic: D_1 = -(s + 1/s - 2) < 0.
    Mat hyp(2, 2);
    hyp << 2, 0, 0, 0.5;
    CHECK(d_omega(hyp, Complex(1, 0), tol) == doctest::Approx(-0.5));

    // D_omega = 0 exactly where nu_omega >= 1, across random basic forms.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, kPi - 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        double th = u(rng);
        Mat m = diamond(rot2(th), hyp);
        Complex at(std::cos(th), std::sin(th));
        CHECK(std::abs(d_omega(m, at, tol)) < 1e-9);
        CHECK(nu_omega(m, at, tol) == 1);
        Complex off(std::cos(th + 0.1), std::sin(th + 0.1));
        CHECK(std::abs(d_omega(m, off, tol)) > 1e-4);
        CHECK(nu_omega(m, off, tol) == 0);
    }
}

TEST_CASE("d_omega sign is invariant under symplectic conjugation") {
    Tolerances tol;
    std::mt19937_64 rng(23);
    Mat m = diamond(rot2(0.9), rot2(2.5));
    Mat p = random_symplectic(2, rng);
    Mat conj = p * m * p.inverse();
    for (double a : {0.0, 0.9, 2.0, 3.14159}) {
        Complex om(std::cos(a), std::sin(a));
        double d1 = d_omega(m, om, tol);
        double d2 = d_omega(conj, om, tol);
        CHECK(d1 == doctest::Approx(d2).epsilon(1e-6));
    }
}

TEST_CASE("realize produces the literal normal-form matrices") {
    Mat n11 = realize(BasicNormalForm::N1(1, 1)).entries();
    Mat want(2, 2);
    want << 1, 1, 0, 1;
    CHECK((n11 - want).norm() == doctest::Approx(0.0));

    Mat d2 = realize(BasicNormalForm::D(2)).entries();
    want << 2, 0, 0, 0.5;
    CHECK((d2 - want).norm() == doctest::Approx(0.0));

    Mat r = realize(BasicNormalForm::R(kPi / 2)).entries();
    want << 0, -1, 1, 0;
    CHECK((r - want).norm() == doctest::Approx(0.0));

    Eigen::Matrix2d b;
    double th = 1.1;
    b = rot2(th) * Eigen::Vector2d(1.0, 0.5).asDiagonal(); // R*S, S sym, b2 != b3
    Mat n2 = realize(BasicNormalForm::N2(th, b)).entries();
    CHECK(symplectic_defect(n2) < 1e-12);
    CHECK((n2.block(0, 0, 2, 2) - rot2(th)).norm() == doctest::Approx(0.0));
    CHECK((n2.block(0, 2, 2, 2) - b).norm() == doctest::Approx(0.0));
}

TEST_CASE("realize validates parameters") {
    CHECK_THROWS_AS(realize(BasicNormalForm::D(3)), RangeError);
    CHECK_THROWS_AS(realize(BasicNormalForm::N1(2, 0)), RangeError);
    CHECK_THROWS_AS(realize(BasicNormalForm::N1(1, 0.5)), RangeError);
    CHECK_THROWS_AS(realize(BasicNormalForm::R(0.0)), RangeError);
    CHECK_THROWS_AS(realize(BasicNormalForm::R(2 * kPi)), RangeError);
    Eigen::Matrix2d sym = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(realize(BasicNormalForm::N2(1.0, sym)), RangeError);
}

TEST_CASE("realize of a list uses the diamond product") {
    auto m = realize({BasicNormalForm::R(0.8), BasicNormalForm::D(2)});
    CHECK(m.n() == 2);
    Mat direct = diamond(rot2(0.8), realize(BasicNormalForm::D(2)).entries());
    CHECK((m.entries() - direct).norm() == doctest::Approx(0.0));
}

TEST_CASE("circle_spectrum classifies reference matrices") {
    auto hyp = circle_spectrum(realize(BasicNormalForm::D(2)));
    CHECK(hyp.eigenvalues.empty());

    auto jord = circle_spectrum(realize(BasicNormalForm::N1(1, 1)));
    REQUIRE(jord.eigenvalues.size() == 1);
    CHECK(jord.eigenvalues[0].omega == Complex(1, 0));
    CHECK(jord.eigenvalues[0].alg == 2);
    CHECK(jord.eigenvalues[0].geom == 1);

    double th = 1.3;
    auto mix = circle_spectrum(
        realize({BasicNormalForm::R(th), BasicNormalForm::D(2)}));
    REQUIRE(mix.eigenvalues.size() == 2);
    CHECK(std::abs(mix.eigenvalues[0].omega - Complex(std::cos(th), std::sin(th))) <
          1e-8);
    CHECK(std::abs(mix.eigenvalues[1].omega - Complex(std::cos(th), -std::sin(th))) <
          1e-8);
    CHECK(mix.eigenvalues[0].alg == 1);
    CHECK(mix.eigenvalues[0].geom == 1);
    CHECK(mix.total_alg() == 2);
}

TEST_CASE("nu_omega adds under diamond and respects conjugation") {
    Tolerances tol;
    double th = 0.77;
    Complex om(std::cos(th), std::sin(th));
    Mat a = rot2(th);
    Mat b = diamond(rot2(th), realize(BasicNormalForm::D(-2)).entries());
    CHECK(nu_omega(diamond(a, b), om, tol) ==
          nu_omega(a, om, tol) + nu_omega(b, om, tol));
    CHECK(nu_omega(a, std::conj(om), tol) == nu_omega(a, om, tol));
}

TEST_CASE("JSON round-trip is exact") {
    std::mt19937_64 rng(99);
    SymplecticMatrix m(random_symplectic(2, rng), 1e-8);
    nlohmann::json j = to_json(m);
    Tolerances loose;
    loose.symp = 1e-8;
    SymplecticMatrix back = symplectic_from_json(j, loose);
    CHECK((m.entries() - back.entries()).cwiseAbs().maxCoeff() == 0.0);
}
