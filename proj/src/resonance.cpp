#include "cchar/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cchar {

double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) /
           static_cast<double>(r.denominator());
}

long OrbitIndexData::index_at(long m) const {
    if (m < 1 || static_cast<std::size_t>(m) > table.size()) {
        throw DepthError("orbit '" + id + "': iteration table stops before m = " +
                             std::to_string(m),
                         m);
    }
    return table[m - 1][1];
}

int OrbitIndexData::nullity_at(long m) const {
    if (m < 1 || static_cast<std::size_t>(m) > table.size()) {
        throw DepthError("orbit '" + id + "': iteration table stops before m = " +
                             std::to_string(m),
                         m);
    }
    return static_cast<int>(table[m - 1][2]);
}

OrbitIndexData shifted_orbit_data(std::string id, const IndexProfile& profile) {
    OrbitIndexData d;
    d.id = std::move(id);
    d.n = profile.n;
    d.K = profile.K;
    d.k_unbounded = profile.k_unbounded;
    d.mean_index = profile.mean_index;
    d.table = ekeland_index(profile, profile.n);
    return d;
}

nlohmann::json OrbitIndexData::to_json() const {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : table) jt.push_back({t[0], t[1], t[2]});
    return nlohmann::json{{"id", id},
                          {"n", n},
                          {"K", K},
                          {"k_unbounded", k_unbounded},
                          {"mean_index", mean_index},
                          {"table", jt}};
}

OrbitIndexData OrbitIndexData::from_json(const nlohmann::json& j) {
    OrbitIndexData d;
    d.id = j.at("id").get<std::string>();
    d.n = j.at("n").get<int>();
    d.K = j.at("K").get<long>();
    d.k_unbounded = j.value("k_unbounded", false);
    d.mean_index = j.at("mean_index").get<double>();
    long expect = 1;
    for (const auto& row : j.at("table")) {
        std::array<long, 3> t{row.at(0).get<long>(), row.at(1).get<long>(),
                              row.at(2).get<long>()};
        if (t[0] != expect++) {
            throw RangeError("orbit table: iterates must run 1, 2, ...");
        }
        d.table.push_back(t);
    }
    return d;
}

// ---------------------------------------------------------------------------
// critical type numbers

void validate_type_numbers(const CriticalTypeNumbers& k,
                           const OrbitIndexData& orbit) {
    const std::size_t width = 2 * orbit.n - 1;  // l = 0..2n-2
    if (k.k.size() != static_cast<std::size_t>(orbit.K)) {
        throw RangeError("critical type numbers: need one row per m = 1..K");
    }
    for (long m = 1; m <= orbit.K; ++m) {
        const auto& row = k.k[m - 1];
        if (row.size() != width) {
            throw RangeError("critical type numbers: row width must be 2n-1");
        }
        const int nu = orbit.nullity_at(m);
        auto fail = [&](const std::string& rule) {
            throw InvariantViolation("critical type numbers violate " + rule +
                                     " at m = " + std::to_string(m));
        };
        for (std::size_t l = 0; l < width; ++l) {
            if (row[l] < 0) fail("nonnegativity");
            if (row[l] > 0 && static_cast<int>(l) > nu - 1) fail("support");
        }
        if (row[0] > 1) fail("boundary-binary");
        if (nu >= 1 && row[nu - 1] > 1) fail("boundary-binary");
        if (row[0] == 1) {
            for (int l = 1; l <= nu - 1; ++l)
                if (row[l] != 0) fail("bottom-exclusion");
        }
        if (nu >= 2 && row[nu - 1] == 1) {
            for (int l = 0; l <= nu - 2; ++l)
                if (row[l] != 0) fail("top-exclusion");
        }
        bool interior = false;
        for (int l = 1; l <= nu - 2; ++l) interior |= row[l] >= 1;
        if (interior && (row[0] != 0 || row[nu - 1] != 0)) {
            fail("interior-exclusion");
        }
        if (nu <= 3) {
            int nonzero = 0;
            for (std::size_t l = 0; l < width; ++l) nonzero += row[l] != 0;
            if (nonzero > 1) fail("low-nullity-single");
        }
    }
}

CriticalTypeNumbers nondegenerate_type_numbers(const OrbitIndexData& orbit) {
    const long i1 = orbit.index_at(1);
    CriticalTypeNumbers k;
    for (long m = 1; m <= orbit.K; ++m) {
        if (orbit.nullity_at(m) != 1) {
            throw RangeError(
                "nondegenerate_type_numbers: iterate m = " + std::to_string(m) +
                " is degenerate");
        }
        std::vector<long> row(2 * orbit.n - 1, 0);
        row[0] = (orbit.index_at(m) - i1) % 2 == 0 ? 1 : 0;
        k.k.push_back(std::move(row));
    }
    return k;
}

EulerCharacteristic euler_characteristic(const OrbitIndexData& orbit,
                                         const CriticalTypeNumbers& k) {
    if (orbit.k_unbounded) {
        bool degenerate = false;
        for (long m = 1; m <= orbit.K; ++m) degenerate |= orbit.nullity_at(m) > 1;
        if (degenerate) {
            throw NumericalError(
                "euler_characteristic: period K beyond the rational-angle cap "
                "with degenerate iterates; the average is undefined by this "
                "route");
        }
    }
    validate_type_numbers(k, orbit);

    EulerCharacteristic ec;
    long long total = 0;
    for (long m = 1; m <= orbit.K; ++m) {
        const long i = orbit.index_at(m);
        long chi = 0;
        for (std::size_t l = 0; l < k.k[m - 1].size(); ++l) {
            const long sign = ((i + static_cast<long>(l)) % 2 + 2) % 2 == 0 ? 1 : -1;
            chi += sign * k.k[m - 1][l];
        }
        ec.per_m.push_back(chi);
        total += chi;
    }
    ec.chi_hat = Rational(total, orbit.K);
    return ec;
}

Rational nondegenerate_chi(const OrbitIndexData& orbit) {
    if (orbit.table.size() < 2) {
        throw RangeError("nondegenerate_chi: need the table at least to m = 2");
    }
    for (const auto& t : orbit.table) {
        if (t[2] != 1) {
            throw RangeError("nondegenerate_chi: iterate m = " +
                             std::to_string(t[0]) + " is degenerate");
        }
    }
    const long i1 = orbit.index_at(1), i2 = orbit.index_at(2);
    const long long sign = ((i1 % 2) + 2) % 2 == 0 ? 1 : -1;
    return (i2 - i1) % 2 == 0 ? Rational(sign) : Rational(sign, 2);
}

// ---------------------------------------------------------------------------
// resonance sum

ResonanceReport resonance_sum(
    const std::vector<std::pair<OrbitIndexData, Rational>>& orbits) {
    std::vector<const std::pair<OrbitIndexData, Rational>*> sorted;
    for (const auto& o : orbits) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->first.id < b->first.id;
    });

    ResonanceReport rep;
    for (const auto* o : sorted) {
        const double ih = o->first.mean_index;
        // The mean index of a closed characteristic never drops below 2; the
        // circle attains the bound, so equality within roundoff is accepted.
        if (ih < 2.0 - 1e-9) {
            throw InvariantViolation("resonance_sum: orbit '" + o->first.id +
                                     "' has mean index " + std::to_string(ih) +
                                     " < 2, an upstream defect");
        }
        const double contribution = to_double(o->second) / ih;
        rep.orbits.push_back({o->first.id, ih, o->second, contribution});
        rep.total += contribution;
    }
    rep.residual = std::abs(rep.total - 0.5);
    return rep;
}

nlohmann::json ResonanceReport::to_json() const {
    nlohmann::json jo = nlohmann::json::array();
    for (const auto& e : orbits) {
        jo.push_back({{"id", e.id},
                      {"i_hat", e.mean_index},
                      {"chi_hat", {{"num", e.chi_hat.numerator()},
                                   {"den", e.chi_hat.denominator()}}},
                      {"contribution", e.contribution}});
    }
    return nlohmann::json{
        {"orbits", jo}, {"total", total}, {"residual", residual}};
}

std::string ResonanceReport::to_csv() const {
    std::ostringstream out;
    out << "orbit,i_hat,chi_hat,contribution\n";
    out.precision(17);
    for (const auto& e : orbits) {
        out << e.id << ',' << e.mean_index << ',' << e.chi_hat.numerator()
            << '/' << e.chi_hat.denominator() << ',' << e.contribution << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Morse counts

MorseCounts morse_counts(
    const std::vector<std::pair<OrbitIndexData, CriticalTypeNumbers>>& orbits,
    long cutoff) {
    if (cutoff < 1) throw RangeError("morse_counts: cutoff must be positive");

    MorseCounts mc;
    mc.cutoff = cutoff;
    mc.w.assign(cutoff + 2, 0);

    for (const auto& [orbit, k] : orbits) {
        validate_type_numbers(k, orbit);
        const int n = orbit.n;
        // The index climbs like m * i_hat within a band of width 2n, so the
        // table must reach past the cutoff by that band to terminate the
        // enumeration honestly.
        const double ih = std::max(orbit.mean_index, 1e-9);
        const long required =
            static_cast<long>(std::ceil((cutoff + 1 + 2 * n) / ih)) + orbit.K;
        if (static_cast<long>(orbit.table.size()) < required) {
            throw DepthError("morse_counts: orbit '" + orbit.id +
                                 "' must be tabulated to m = " +
                                 std::to_string(required),
                             required);
        }

        double row_weight = 0.0;
        for (long m = 1; m <= orbit.K; ++m) {
            for (std::size_t l = 0; l < k.k[m - 1].size(); ++l) {
                const long kl = k.k[m - 1][l];
                if (kl == 0) continue;
                row_weight += static_cast<double>(kl);
                for (long s = 0;; ++s) {
                    const long mm = s * orbit.K + m;
                    if (mm > static_cast<long>(orbit.table.size())) break;
                    const long h = orbit.index_at(mm) + static_cast<long>(l);
                    if (h >= 0 && h <= cutoff + 1) mc.w[h] += kl;
                }
            }
        }
        mc.per_h_bound +=
            row_weight * (4.0 * n / (static_cast<double>(orbit.K) * ih) + 2.0);
    }

    for (long h = 0; h <= cutoff; ++h) {
        mc.alternating += h % 2 == 0 ? mc.w[h] : -mc.w[h];
    }
    return mc;
}

nlohmann::json MorseCounts::to_json() const {
    return nlohmann::json{{"cutoff", cutoff},
                          {"w", w},
                          {"alternating", alternating},
                          {"per_h_bound", per_h_bound}};
}

std::string MorseCounts::to_csv() const {
    std::ostringstream out;
    out << "h,w_h\n";
    for (std::size_t h = 0; h < w.size(); ++h) {
        out << h << ',' << w[h] << '\n';
    }
    return out.str();
}

MorseTrend morse_trend(
    const std::vector<std::pair<OrbitIndexData, CriticalTypeNumbers>>& orbits,
    const std::vector<long>& cutoffs) {
    if (cutoffs.size() < 2) {
        throw RangeError("morse_trend: need at least two cutoffs");
    }
    MorseTrend trend;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (long cutoff : cutoffs) {
        MorseCounts mc = morse_counts(orbits, cutoff);
        const double x = static_cast<double>(cutoff);
        const double y = static_cast<double>(mc.alternating);
        trend.series.emplace_back(cutoff, y / x);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double m = static_cast<double>(cutoffs.size());
    trend.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return trend;
}

// ---------------------------------------------------------------------------
// stability audit

StabilityAudit stability_audit(const std::vector<OrbitStabilityData>& orbits,
                               int n) {
    StabilityAudit audit;
    audit.orbit_count = static_cast<int>(orbits.size());

    long best = 1L << 40;
    for (const auto& o : orbits) {
        const long num = o.i1 + 2 * o.s_plus_one - o.nu1 + n;
        const long bound =
            num >= 0 ? num / 2 : -((-num + 1) / 2);  // floor division
        best = std::min(best, bound);
    }
    audit.rho_lower_bound = orbits.empty() ? 0 : best;

    if (n == 2 && orbits.size() == 2) {
        audit.two_orbit_rule = true;
        for (const auto& o : orbits) {
            if (o.cls.degenerate ||
                o.cls.type != StabilityType::IrrationallyElliptic) {
                audit.violations.push_back(
                    "orbit '" + o.id + "' is " + to_string(o.cls) +
                    "; a two-orbit R^4 system admits only irrationally "
                    "elliptic orbits");
            }
        }
    }
    if (n == 3) {
        audit.three_orbit_rule = true;
        if (orbits.size() < 3) {
            audit.violations.push_back(
                "only " + std::to_string(orbits.size()) +
                " distinct orbits found; R^6 requires at least 3");
        }
    }
    return audit;
}

nlohmann::json StabilityAudit::to_json() const {
    return nlohmann::json{{"orbit_count", orbit_count},
                          {"rho_lower_bound", rho_lower_bound},
                          {"two_orbit_rule", two_orbit_rule},
                          {"three_orbit_rule", three_orbit_rule},
                          {"violations", violations},
                          {"pass", pass()}};
}

} // namespace cchar
