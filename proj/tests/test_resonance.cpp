#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/resonance.hpp"

using namespace cchar;
namespace {

/// Non-degenerate orbit data with i(y^m) = 2 floor(m rho) + off, nu = 1:
/// the shifted index pattern of a planar elliptic orbit with rotation rho.
OrbitIndexData rotation_orbit(const std::string& id, double rho, long off,
                              int depth, int n = 1) {
    OrbitIndexData d;
    d.id = id;
    d.n = n;
    d.K = 2;
    d.mean_index = 2.0 * rho;
    for (int m = 1; m <= depth; ++m) {
        d.table.push_back({m, 2 * static_cast<long>(std::floor(m * rho)) + off, 1});
    }
    return d;
}

OrbitIndexData table_orbit(const std::string& id, int n, long K,
                           std::vector<std::array<long, 3>> rows,
                           double mean = 4.0) {
    OrbitIndexData d;
    d.id = id;
    d.n = n;
    d.K = K;
    d.mean_index = mean;
    d.table = std::move(rows);
    return d;
}

std::string rule_of(const CriticalTypeNumbers& k, const OrbitIndexData& orbit) {
    try {
        validate_type_numbers(k, orbit);
    } catch (const InvariantViolation& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("closed-form average characteristic by parity") {
    // (i(y), i(y^2)) -> chi_hat: even gap gives +-1 by the parity of i(y),
    // odd gap halves it.
    struct Case { long i1, i2; Rational want; };
    const Case cases[] = {
        {0, 4, Rational(1)},
        {1, 4, Rational(-1, 2)},
        {1, 3, Rational(-1)},
        {2, 5, Rational(1, 2)},
    };
    for (const auto& c : cases) {
        auto d = table_orbit("y", 2, 2, {{1, c.i1, 1}, {2, c.i2, 1}});
        CHECK(nondegenerate_chi(d) == c.want);
        auto ec = euler_characteristic(d, nondegenerate_type_numbers(d));
        CHECK(ec.chi_hat == c.want);
    }
}

TEST_CASE("the two chi routes agree on rotation families") {
    for (double rho : {1.0, std::sqrt(2.0), 1.6180339887498949, 2.71828}) {
        for (long off : {0L, 1L}) {
            auto d = rotation_orbit("y", rho, off, 8);
            CHECK(euler_characteristic(d, nondegenerate_type_numbers(d)).chi_hat ==
                  nondegenerate_chi(d));
        }
    }
}

TEST_CASE("nondegenerate type numbers mark the even-gap iterates") {
    auto d = table_orbit("y", 2, 4, {{1, 3, 1}, {2, 7, 1}, {3, 10, 1}, {4, 14, 1}});
    auto k = nondegenerate_type_numbers(d);
    REQUIRE(k.k.size() == 4);
    CHECK(k.k[0] == std::vector<long>({1, 0, 0})); // gap 0
    CHECK(k.k[1] == std::vector<long>({1, 0, 0})); // gap 4
    CHECK(k.k[2] == std::vector<long>({0, 0, 0})); // gap 7
    CHECK(k.k[3] == std::vector<long>({0, 0, 0})); // gap 11

    auto deg = table_orbit("y", 2, 2, {{1, 3, 1}, {2, 7, 2}});
    CHECK_THROWS_AS(nondegenerate_type_numbers(deg), RangeError);
}

TEST_CASE("type-number validator names the violated rule") {
    auto nd = table_orbit("y", 2, 2, {{1, 2, 1}, {2, 4, 1}});
    CHECK(rule_of({{{0, 1, 0}, {1, 0, 0}}}, nd).find("support") !=
          std::string::npos);
    CHECK(rule_of({{{2, 0, 0}, {1, 0, 0}}}, nd).find("boundary-binary") !=
          std::string::npos);

    auto deg = table_orbit("y", 2, 2, {{1, 2, 3}, {2, 4, 3}});
    CHECK(rule_of({{{1, 1, 0}, {0, 0, 0}}}, deg).find("bottom-exclusion") !=
          std::string::npos);
    CHECK(rule_of({{{0, 1, 1}, {0, 0, 0}}}, deg).find("top-exclusion") !=
          std::string::npos);
    CHECK(rule_of({{{0, 0, 1}, {0, 0, 0}}}, deg).empty());
    CHECK(rule_of({{{0, 3, 0}, {1, 0, 0}}}, deg).empty());

    // the violated iterate is reported
    CHECK(rule_of({{{1, 0, 0}, {0, 1, 1}}}, deg).find("m = 2") !=
          std::string::npos);

    CHECK_THROWS_AS(validate_type_numbers({{{1, 0, 0}}}, nd), RangeError);
    CHECK_THROWS_AS(validate_type_numbers({{{1, 0}, {1, 0}}}, nd), RangeError);
}

TEST_CASE("euler characteristic of a degenerate pattern") {
    auto d = table_orbit("y", 2, 2, {{1, 0, 3}, {2, 2, 1}});
    CriticalTypeNumbers k{{{0, 2, 0}, {1, 0, 0}}};
    auto ec = euler_characteristic(d, k);
    CHECK(ec.per_m == std::vector<long>({-2, 1}));
    CHECK(ec.chi_hat == Rational(-1, 2));
}

TEST_CASE("euler characteristic refuses an uncapped degenerate period") {
    auto d = table_orbit("y", 2, 2, {{1, 0, 3}, {2, 2, 1}});
    d.k_unbounded = true;
    CriticalTypeNumbers k{{{0, 2, 0}, {1, 0, 0}}};
    CHECK_THROWS_AS(euler_characteristic(d, k), NumericalError);
}

TEST_CASE("resonance sum folds exactly and checks the mean-index floor") {
    auto a = table_orbit("y2", 1, 2, {{1, 2, 1}, {2, 4, 1}}, 6.0);
    auto b = table_orbit("y1", 1, 2, {{1, 0, 1}, {2, 2, 1}}, 3.0);
    auto rep = resonance_sum({{a, Rational(1)}, {b, Rational(1)}});
    REQUIRE(rep.orbits.size() == 2);
    CHECK(rep.orbits[0].id == "y1"); // folded in id order
    CHECK(rep.total == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rep.residual <= 1e-15);

    // the circle attains the i_hat >= 2 bound exactly
    auto circle = table_orbit("y1", 1, 2, {{1, 0, 1}, {2, 2, 1}}, 2.0);
    CHECK(resonance_sum({{circle, Rational(1)}}).total ==
          doctest::Approx(0.5));

    auto bad = table_orbit("y1", 1, 2, {{1, 0, 1}, {2, 2, 1}}, 1.5);
    CHECK_THROWS_AS(resonance_sum({{bad, Rational(1)}}), InvariantViolation);
}

TEST_CASE("resonance report serialization") {
    auto a = table_orbit("y1", 1, 2, {{1, 1, 1}, {2, 4, 1}}, 4.0);
    auto rep = resonance_sum({{a, Rational(-1, 2)}});
    auto j = rep.to_json();
    CHECK(j.at("orbits").size() == 1);
    CHECK(j.at("orbits")[0].at("chi_hat").at("num").get<long>() == -1);
    CHECK(j.at("orbits")[0].at("chi_hat").at("den").get<long>() == 2);
    auto csv = rep.to_csv();
    CHECK(csv.rfind("orbit,i_hat,chi_hat,contribution\n", 0) == 0);
    CHECK(csv.find("-1/2") != std::string::npos);
}

TEST_CASE("orbit data json round trip") {
    auto d = rotation_orbit("y7", std::sqrt(3.0), 1, 5, 2);
    d.k_unbounded = true;
    auto back = OrbitIndexData::from_json(d.to_json());
    CHECK(back.id == d.id);
    CHECK(back.n == d.n);
    CHECK(back.K == d.K);
    CHECK(back.k_unbounded == d.k_unbounded);
    CHECK(back.mean_index == d.mean_index);
    CHECK(back.table == d.table);

    auto j = d.to_json();
    j["table"][1][0] = 5; // iterates must run 1, 2, ...
    CHECK_THROWS_AS(OrbitIndexData::from_json(j), RangeError);

    CHECK_THROWS_AS(d.index_at(6), DepthError);
    CHECK_THROWS_AS(d.nullity_at(0), DepthError);
}

TEST_CASE("morse counts: stability, bound, and depth guard") {
    const double rho = std::sqrt(2.0);
    const long cutoff = 60;
    auto need = static_cast<int>(std::ceil((cutoff + 1 + 2) / (2 * rho))) + 2;

    auto d1 = rotation_orbit("y", rho, 0, need);
    auto d2 = rotation_orbit("y", rho, 0, 2 * need);
    auto k1 = nondegenerate_type_numbers(d1);

    auto mc1 = morse_counts({{d1, k1}}, cutoff);
    auto mc2 = morse_counts({{d2, k1}}, cutoff);
    CHECK(mc1.w == mc2.w); // deepening the table changes nothing below cutoff
    CHECK(mc1.alternating == mc2.alternating);

    for (long h = 0; h <= cutoff; ++h) {
        CHECK(static_cast<double>(mc1.w[h]) <= mc1.per_h_bound);
    }

    auto shallow = rotation_orbit("y", rho, 0, need - 3);
    CHECK_THROWS_AS(morse_counts({{shallow, k1}}, cutoff), DepthError);
    CHECK_THROWS_AS(morse_counts({{d1, k1}}, 0), RangeError);
}

TEST_CASE("morse trend of the circle is exactly one half") {
    // i(y^m) = 2m - 2: one critical level per even degree.
    OrbitIndexData d;
    d.id = "y1";
    d.n = 1;
    d.K = 2;
    d.mean_index = 2.0;
    for (int m = 1; m <= 80; ++m) d.table.push_back({m, 2 * m - 2, 1});
    auto k = nondegenerate_type_numbers(d);

    auto trend = morse_trend({{d, k}}, {40, 60, 80, 100});
    CHECK(trend.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(trend.series.size() == 4);
    CHECK_THROWS_AS(morse_trend({{d, k}}, {40}), RangeError);
}

TEST_CASE("stability audit rules") {
    OrbitStabilityData e1{"y1", {false, StabilityType::IrrationallyElliptic}, 3, 1, 1};
    OrbitStabilityData e2{"y2", {false, StabilityType::IrrationallyElliptic}, 5, 1, 1};
    OrbitStabilityData hyp{"y2", {false, StabilityType::Hyperbolic}, 5, 1, 0};

    auto ok = stability_audit({e1, e2}, 2);
    CHECK(ok.two_orbit_rule);
    CHECK(ok.pass());
    // floor((3 + 2 - 1 + 2)/2) = 3
    CHECK(ok.rho_lower_bound == 3);

    auto bad = stability_audit({e1, hyp}, 2);
    CHECK_FALSE(bad.pass());
    REQUIRE(bad.violations.size() == 1);
    CHECK(bad.violations[0].find("y2") != std::string::npos);

    auto three = stability_audit({e1, e2}, 3);
    CHECK(three.three_orbit_rule);
    CHECK_FALSE(three.pass());

    OrbitStabilityData low{"y0", {false, StabilityType::Hyperbolic}, -4, 1, 0};
    CHECK(stability_audit({low}, 2).rho_lower_bound == -2); // floor(-3/2)
}
