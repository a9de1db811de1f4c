#include "cchar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/floquet.hpp"
#include "cchar/index.hpp"
#include "cchar/orbits.hpp"
#include "cchar/resonance.hpp"

namespace cchar {

namespace {

constexpr double kPi = std::numbers::pi;

std::string type_name(StabilityType t) {
    switch (t) {
        case StabilityType::Hyperbolic: return "hyperbolic";
        case StabilityType::Elliptic: return "elliptic";
        case StabilityType::IrrationallyElliptic: return "irrationally-elliptic";
        default: return "mixed";
    }
}

StabilityType type_from_name(const std::string& s) {
    if (s == "hyperbolic") return StabilityType::Hyperbolic;
    if (s == "elliptic") return StabilityType::Elliptic;
    if (s == "irrationally-elliptic") return StabilityType::IrrationallyElliptic;
    if (s == "mixed") return StabilityType::Mixed;
    throw RangeError("classification: unknown stability type '" + s + "'");
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RangeError("cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return j;
}

void save(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RangeError("cannot write '" + path.string() + "'");
    out << text;
}

void save(const std::filesystem::path& path, const nlohmann::json& j) {
    save(path, j.dump(2) + "\n");
}

double require_positive(const nlohmann::json& j, const char* field,
                        double fallback) {
    if (!j.contains(field)) return fallback;
    const double v = j.at(field).get<double>();
    if (!(v > 0.0)) {
        throw RangeError(std::string("config: field '") + field +
                         "' must be positive");
    }
    return v;
}

/// Largest coordinate-direction radius of the body, the scale for shooting
/// horizons and the Hamiltonian plateau.
std::pair<double, double> radius_range(const ConvexBody& body) {
    double lo = 1e300, hi = 0.0;
    for (int k = 0; k < 2 * body.n(); ++k) {
        Vec e = Vec::Zero(2 * body.n());
        e(k) = 1.0;
        const double r = 1.0 / body.gauge(e);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return {lo, hi};
}

HamiltonianModel fixed_period_model(const ConvexBody& body, double tau_min,
                                    double tau_max, double alpha) {
    const double a = 3.0 * tau_max;
    return HamiltonianModel::scaled(body, a,
                                    build_phi(0.9 * tau_min / a, alpha, false));
}

} // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (!j.contains("body") || j.at("body").is_null() ||
        (j.at("body").is_object() && j.at("body").empty())) {
        throw RangeError("config: missing or empty field 'body'");
    }
    cfg.body = ConvexBody::from_json(j.at("body"));

    if (j.contains("solvers")) {
        cfg.solvers = j.at("solvers").get<std::vector<std::string>>();
        for (const auto& s : cfg.solvers) {
            if (s != "analytic" && s != "shooting" && s != "dual-action") {
                throw RangeError("config: field 'solvers' contains unknown "
                                 "solver '" + s + "'");
            }
        }
        if (cfg.solvers.empty()) {
            throw RangeError("config: field 'solvers' must not be empty");
        }
    }

    if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        cfg.tol.symp = require_positive(t, "symp", cfg.tol.symp);
        cfg.tol.eig = require_positive(t, "eig", cfg.tol.eig);
        cfg.tol.rank_rel = require_positive(t, "rank_rel", cfg.tol.rank_rel);
        cfg.tol.mean_tol = require_positive(t, "mean_tol", cfg.tol.mean_tol);
        cfg.tol.perturb_delta =
            require_positive(t, "perturb_delta", cfg.tol.perturb_delta);
        cfg.tol.angle_tol = require_positive(t, "angle_tol", cfg.tol.angle_tol);
        cfg.tol.path_resolution =
            require_positive(t, "path_resolution", cfg.tol.path_resolution);
    }

    cfg.m_max = static_cast<int>(j.value("m_max", cfg.m_max));
    if (cfg.m_max < 2) throw RangeError("config: field 'm_max' must be >= 2");

    if (j.contains("morse_cutoffs")) {
        cfg.morse_cutoffs = j.at("morse_cutoffs").get<std::vector<long>>();
        for (long c : cfg.morse_cutoffs) {
            if (c < 1) {
                throw RangeError(
                    "config: field 'morse_cutoffs' must be positive");
            }
        }
    }

    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = static_cast<int>(j.value("workers", cfg.workers));
    if (cfg.workers < 1) throw RangeError("config: field 'workers' must be >= 1");
    cfg.modes = static_cast<int>(j.value("modes", cfg.modes));
    if (cfg.modes < 1) throw RangeError("config: field 'modes' must be >= 1");
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (!(cfg.alpha > 1.0 && cfg.alpha < 2.0)) {
        throw RangeError("config: field 'alpha' must lie in (1, 2)");
    }
    cfg.random_seeds = static_cast<int>(j.value("random_seeds", cfg.random_seeds));
    if (cfg.random_seeds < 0) {
        throw RangeError("config: field 'random_seeds' must be >= 0");
    }
    cfg.t_max_factor = j.value("t_max_factor", cfg.t_max_factor);
    if (!(cfg.t_max_factor > 0)) {
        throw RangeError("config: field 't_max_factor' must be positive");
    }
    return cfg;
}

int cmd_orbits(const RunConfig& cfg) {
    if (cfg.body.n() == 0) {
        std::cerr << "config: missing or empty field 'body'\n";
        return kExitBadInput;
    }
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<ClosedCharacteristic> found;
    try {
        const auto [r_min, r_max] = radius_range(cfg.body);
        const bool analytic =
            std::count(cfg.solvers.begin(), cfg.solvers.end(), "analytic");
        if (analytic && cfg.body.is_ellipsoid()) {
            auto orbits = ellipsoid_orbits(cfg.body, 256, cfg.tol);
            found.insert(found.end(), orbits.begin(), orbits.end());
        }

        if (std::count(cfg.solvers.begin(), cfg.solvers.end(), "shooting")) {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> gauss;
            for (int trial = 0; trial < cfg.random_seeds; ++trial) {
                Vec x(2 * cfg.body.n());
                for (int k = 0; k < x.size(); ++k) x(k) = gauss(rng);
                const Vec y = cfg.body.project(x);
                const double t_max =
                    cfg.t_max_factor * 2 * kPi * y.squaredNorm();
                if (auto orbit = shoot(cfg.body, y, t_max, cfg.tol)) {
                    found.push_back(*orbit);
                }
            }
        }

        if (std::count(cfg.solvers.begin(), cfg.solvers.end(), "dual-action")) {
            const double tau_lo = 2 * kPi * r_min * r_min;
            const double tau_hi = 2 * kPi * r_max * r_max;
            auto hm = fixed_period_model(cfg.body, tau_lo, 2.0 * tau_hi,
                                         cfg.alpha);
            for (int k = 0; k < cfg.body.n(); ++k) {
                FourierLoop loop0(cfg.body.n(), cfg.modes);
                loop0.coeff(1) = Vec::Zero(2 * cfg.body.n());
                loop0.coeff(1)(cfg.body.n() + k) = 0.1;
                if (auto res = dual_action(hm, loop0, cfg.tol)) {
                    found.push_back(res->orbit);
                }
            }
        }

        if (found.empty()) {
            std::cerr << "no closed characteristic found by the selected "
                         "solvers\n";
            return kExitSolver;
        }
        found = deduplicate(std::move(found));
        for (const auto& orbit : found) validate_orbit(cfg.body, orbit);
    } catch (const RangeError& e) {
        std::cerr << e.what() << '\n';
        return kExitBadInput;
    } catch (const NumericalError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    }

    nlohmann::json jorbits = nlohmann::json::array();
    for (const auto& orbit : found) jorbits.push_back(orbit.to_json());
    save(std::filesystem::path(cfg.out_dir) / "orbits.json",
         nlohmann::json{{"body", cfg.body.to_json()},
                        {"n", cfg.body.n()},
                        {"orbits", jorbits}});

    int primes = 0;
    for (const auto& orbit : found) {
        if (orbit.multiplicity == 1) ++primes;
        std::cout << (orbit.multiplicity == 1
                          ? "prime orbit"
                          : "iterate (m = " +
                                std::to_string(orbit.multiplicity) + ")")
                  << "  tau = " << orbit.tau
                  << "  residual = " << orbit.residual << '\n';
    }
    std::cout << primes << " geometrically distinct orbit(s) -> "
              << cfg.out_dir << "/orbits.json\n";
    return kExitOk;
}

int cmd_indices(const RunConfig& cfg, const std::string& orbits_path) {
    nlohmann::json input;
    ConvexBody body;
    std::vector<ClosedCharacteristic> primes;
    try {
        input = load_json(orbits_path);
        body = ConvexBody::from_json(input.at("body"));
        for (const auto& jo : input.at("orbits")) {
            auto orbit = ClosedCharacteristic::from_json(jo);
            if (orbit.multiplicity == 1) primes.push_back(std::move(orbit));
        }
    } catch (const std::exception& e) {
        std::cerr << "orbits input: " << e.what() << '\n';
        return kExitBadInput;
    }
    if (primes.empty()) {
        std::cerr << "orbits input: no prime orbit present\n";
        return kExitBadInput;
    }
    std::sort(primes.begin(), primes.end(),
              [](const auto& a, const auto& b) { return a.tau < b.tau; });
    std::filesystem::create_directories(cfg.out_dir);

    const int n = body.n();
    const long max_cutoff = *std::max_element(cfg.morse_cutoffs.begin(),
                                              cfg.morse_cutoffs.end());
    nlohmann::json jorbits = nlohmann::json::array();
    try {
        double tau_min = primes.front().tau, tau_max = primes.back().tau;
        auto hm = fixed_period_model(body, tau_min, tau_max, cfg.alpha);

        for (std::size_t idx = 0; idx < primes.size(); ++idx) {
            const std::string id = "y" + std::to_string(idx + 1);
            auto md = linearize(hm, primes[idx], 256, cfg.tol);
            auto profile = iteration_profile(md.path, cfg.m_max, cfg.tol);
            auto circle = circle_index_data(md.path, cfg.tol);

            const double ih = std::max(profile.mean_index, 0.5);
            const int depth = std::max<long>(
                cfg.m_max,
                static_cast<long>(std::ceil((max_cutoff + 1 + 2 * n) / ih)) +
                    profile.K + 2);
            auto deep = bott_iteration_table(circle, depth);

            for (int m = 1; m <= cfg.m_max; ++m) {
                if (deep[m - 1][1] != profile.table[m - 1][1] ||
                    deep[m - 1][2] != profile.table[m - 1][2]) {
                    throw ConsistencyError(
                        id + ": Bott-route iteration disagrees with direct "
                             "path iteration at m = " + std::to_string(m),
                        static_cast<double>(deep[m - 1][1]),
                        static_cast<double>(profile.table[m - 1][1]));
                }
            }
            for (const auto& row : deep) {
                if (std::abs(row[1] - row[0] * profile.mean_index) >
                    2 * n + 1e-6) {
                    std::cerr << id << ": invariant |i(m) - m i_hat| <= 2n "
                              << "fails at m = " << row[0] << " (i = " << row[1]
                              << ", i_hat = " << profile.mean_index << ")\n";
                    return kExitSolver;
                }
            }

            OrbitIndexData data;
            data.id = id;
            data.n = n;
            data.K = profile.K;
            data.k_unbounded = profile.k_unbounded;
            data.mean_index = profile.mean_index;
            data.table = deep;
            for (auto& row : data.table) row[1] -= n;  // dual shift

            int s_plus_one = 0;
            for (const auto& se : profile.splitting) {
                if (std::abs(se.omega - Complex(1.0, 0.0)) < 1e-9) {
                    s_plus_one = se.s_plus;
                }
            }
            const auto cls = classify(md, cfg.tol);

            nlohmann::json jo = data.to_json();
            jo["i1"] = profile.i1;
            jo["nu1"] = profile.nu1;
            jo["s_plus_one"] = s_plus_one;
            jo["classification"] = {{"degenerate", cls.degenerate},
                                    {"type", type_name(cls.type)}};
            jo["tau"] = primes[idx].tau;
            jo["monodromy"] = md.to_json();
            jorbits.push_back(std::move(jo));

            std::cout << id << ": i(y,1) = " << profile.i1
                      << ", nu = " << profile.nu1
                      << ", i_hat = " << profile.mean_index << ", "
                      << to_string(cls) << '\n';
        }
    } catch (const NumericalError& e) {
        std::cerr << "index computation failed: " << e.what() << '\n';
        return kExitSolver;
    }

    save(std::filesystem::path(cfg.out_dir) / "indices.json",
         nlohmann::json{{"n", n}, {"orbits", jorbits}});
    std::cout << jorbits.size() << " profile(s) -> " << cfg.out_dir
              << "/indices.json\n";
    return kExitOk;
}

int cmd_resonance(const RunConfig& cfg, const std::string& indices_path,
                  const std::string& klist_path) {
    nlohmann::json input, klist;
    try {
        input = load_json(indices_path);
        if (!klist_path.empty()) klist = load_json(klist_path);
    } catch (const std::exception& e) {
        std::cerr << "resonance input: " << e.what() << '\n';
        return kExitBadInput;
    }
    std::filesystem::create_directories(cfg.out_dir);

    const int n = input.value("n", 0);
    std::vector<std::pair<OrbitIndexData, Rational>> contributions;
    std::vector<std::pair<OrbitIndexData, CriticalTypeNumbers>> counted;
    std::vector<OrbitStabilityData> stability;
    std::vector<std::string> excluded;

    try {
        for (const auto& jo : input.at("orbits")) {
            OrbitIndexData data = OrbitIndexData::from_json(jo);

            bool degenerate_iterate = false;
            for (long m = 1; m <= data.K; ++m) {
                degenerate_iterate |= data.nullity_at(m) > 1;
            }

            CriticalTypeNumbers k;
            bool have_k = false;
            if (klist.contains(data.id)) {
                for (const auto& row : klist.at(data.id)) {
                    k.k.push_back(row.get<std::vector<long>>());
                }
                try {
                    validate_type_numbers(k, data);
                } catch (const InvariantViolation& e) {
                    std::cerr << "sidecar '" << klist_path << "': " << e.what()
                              << '\n';
                    return kExitBadInput;
                }
                have_k = true;
            } else if (!degenerate_iterate) {
                k = nondegenerate_type_numbers(data);
                have_k = true;
            }

            if (!have_k) {
                excluded.push_back(data.id);
                std::cerr << "warning: orbit '" << data.id
                          << "' has degenerate iterates and no critical-type "
                             "sidecar entry; excluded from the sum\n";
                continue;
            }

            auto ec = euler_characteristic(data, k);
            if (!degenerate_iterate) {
                // the closed form must agree with the averaged route
                const Rational direct = nondegenerate_chi(data);
                if (direct != ec.chi_hat) {
                    throw ConsistencyError(
                        data.id + ": closed-form chi disagrees with the "
                                  "averaged Euler characteristic",
                        to_double(direct), to_double(ec.chi_hat));
                }
            }
            contributions.emplace_back(data, ec.chi_hat);
            counted.emplace_back(std::move(data), std::move(k));

            if (jo.contains("classification")) {
                OrbitStabilityData sd;
                sd.id = counted.back().first.id;
                sd.cls.degenerate =
                    jo.at("classification").at("degenerate").get<bool>();
                sd.cls.type = type_from_name(
                    jo.at("classification").at("type").get<std::string>());
                sd.i1 = jo.at("i1").get<long>();
                sd.nu1 = jo.at("nu1").get<int>();
                sd.s_plus_one = jo.at("s_plus_one").get<int>();
                stability.push_back(std::move(sd));
            }
        }

        ResonanceReport report = resonance_sum(contributions);
        MorseTrend trend = morse_trend(counted, cfg.morse_cutoffs);
        MorseCounts deepest = morse_counts(
            counted, *std::max_element(cfg.morse_cutoffs.begin(),
                                       cfg.morse_cutoffs.end()));
        StabilityAudit audit = stability_audit(stability, n);

        nlohmann::json jtrend = nlohmann::json::array();
        for (const auto& [cutoff, ratio] : trend.series) {
            jtrend.push_back({{"I", cutoff}, {"ratio", ratio}});
        }
        const std::filesystem::path out(cfg.out_dir);
        save(out / "resonance.json",
             nlohmann::json{{"resonance", report.to_json()},
                            {"excluded", excluded},
                            {"morse_trend", jtrend},
                            {"morse_slope", trend.slope},
                            {"stability_audit", audit.to_json()}});
        save(out / "resonance.csv", report.to_csv());
        save(out / "morse.csv", deepest.to_csv());
        std::ostringstream trend_csv;
        trend_csv.precision(17);
        trend_csv << "I,ratio\n";
        for (const auto& [cutoff, ratio] : trend.series) {
            trend_csv << cutoff << ',' << ratio << '\n';
        }
        save(out / "morse_trend.csv", trend_csv.str());

        std::cout << "resonance sum = " << report.total
                  << "  residual = " << report.residual << '\n'
                  << "morse slope = " << trend.slope << '\n'
                  << "stability audit: " << (audit.pass() ? "PASS" : "FAIL")
                  << '\n';
        for (const auto& v : audit.violations) std::cout << "  " << v << '\n';
    } catch (const RangeError& e) {
        std::cerr << "resonance input: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const NumericalError& e) {
        std::cerr << "resonance failure: " << e.what() << '\n';
        return kExitSolver;
    }
    return kExitOk;
}

} // namespace cchar
