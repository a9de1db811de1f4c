#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/pipeline.hpp"

using namespace cchar;
namespace fs = std::filesystem;
namespace {

nlohmann::json base_config(const std::string& out_dir) {
    return nlohmann::json{
        {"body", {{"type", "ellipsoid"}, {"r", {1.0}}}},
        {"solvers", {"analytic", "shooting"}},
        {"out_dir", out_dir},
        {"seed", 11},
        {"morse_cutoffs", {100, 200}},
    };
}

std::string field_error(nlohmann::json j) {
    try {
        RunConfig::from_json(j);
    } catch (const RangeError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path fresh_dir(const std::string& leaf) {
    fs::path d = fs::temp_directory_path() / ("cchar_test_" + leaf);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("run configuration validation names the offending field") {
    auto ok = base_config("/tmp");
    CHECK_NOTHROW(RunConfig::from_json(ok));

    auto no_body = ok;
    no_body.erase("body");
    CHECK(field_error(no_body).find("'body'") != std::string::npos);

    auto bad_solver = ok;
    bad_solver["solvers"] = {"analytic", "simulated-annealing"};
    CHECK(field_error(bad_solver).find("'solvers'") != std::string::npos);

    auto empty_solvers = ok;
    empty_solvers["solvers"] = nlohmann::json::array();
    CHECK(field_error(empty_solvers).find("'solvers'") != std::string::npos);

    auto bad_alpha = ok;
    bad_alpha["alpha"] = 2.5;
    CHECK(field_error(bad_alpha).find("'alpha'") != std::string::npos);

    auto bad_mmax = ok;
    bad_mmax["m_max"] = 1;
    CHECK(field_error(bad_mmax).find("'m_max'") != std::string::npos);

    auto bad_cutoffs = ok;
    bad_cutoffs["morse_cutoffs"] = {100, -5};
    CHECK(field_error(bad_cutoffs).find("'morse_cutoffs'") != std::string::npos);

    auto bad_workers = ok;
    bad_workers["workers"] = 0;
    CHECK(field_error(bad_workers).find("'workers'") != std::string::npos);

    auto bad_modes = ok;
    bad_modes["modes"] = 0;
    CHECK(field_error(bad_modes).find("'modes'") != std::string::npos);
}

TEST_CASE("configuration fields round into the struct") {
    auto j = base_config("/tmp/x");
    j["m_max"] = 8;
    j["workers"] = 3;
    j["alpha"] = 1.7;
    auto cfg = RunConfig::from_json(j);
    CHECK(cfg.body.n() == 1);
    CHECK(cfg.solvers == std::vector<std::string>({"analytic", "shooting"}));
    CHECK(cfg.out_dir == "/tmp/x");
    CHECK(cfg.seed == 11);
    CHECK(cfg.m_max == 8);
    CHECK(cfg.workers == 3);
    CHECK(cfg.alpha == 1.7);
    CHECK(cfg.morse_cutoffs == std::vector<long>({100, 200}));
}

TEST_CASE("the three stages chain through their files") {
    auto dir = fresh_dir("chain");
    auto cfg = RunConfig::from_json(base_config(dir.string()));

    REQUIRE(cmd_orbits(cfg) == kExitOk);
    auto orbits = load(dir / "orbits.json");
    REQUIRE(orbits.at("orbits").size() >= 1);
    CHECK(orbits.at("n").get<int>() == 1);

    REQUIRE(cmd_indices(cfg, (dir / "orbits.json").string()) == kExitOk);
    auto indices = load(dir / "indices.json");
    REQUIRE(indices.at("orbits").size() == 1);
    const auto& orbit = indices.at("orbits")[0];
    CHECK(orbit.at("id").get<std::string>() == "y1");
    CHECK(orbit.at("mean_index").get<double>() == doctest::Approx(2.0));
    CHECK(orbit.at("table").size() >= 2);
    // shifted index of the first iterate: i(y,1) - n = 1 - 1
    CHECK(orbit.at("table")[0][1].get<long>() == 0);

    REQUIRE(cmd_resonance(cfg, (dir / "indices.json").string()) == kExitOk);
    auto res = load(dir / "resonance.json");
    CHECK(res.at("resonance").at("residual").get<double>() <= 1e-9);
    CHECK(res.at("morse_slope").get<double>() ==
          doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.at("stability_audit").at("pass").get<bool>());
    for (const char* f : {"resonance.csv", "morse.csv", "morse_trend.csv"}) {
        CHECK(fs::exists(dir / f));
    }
}

TEST_CASE("identical configuration and seed give byte-identical outputs") {
    auto run = [&](const std::string& leaf) {
        auto dir = fresh_dir(leaf);
        auto cfg = RunConfig::from_json(base_config(dir.string()));
        REQUIRE(cmd_orbits(cfg) == kExitOk);
        REQUIRE(cmd_indices(cfg, (dir / "orbits.json").string()) == kExitOk);
        REQUIRE(cmd_resonance(cfg, (dir / "indices.json").string()) == kExitOk);
        return dir;
    };
    auto d1 = run("det_a");
    auto d2 = run("det_b");
    for (const char* f : {"orbits.json", "indices.json", "resonance.json",
                          "resonance.csv", "morse.csv", "morse_trend.csv"}) {
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
}

TEST_CASE("missing inputs exit with the bad-input code") {
    auto dir = fresh_dir("missing");
    auto cfg = RunConfig::from_json(base_config(dir.string()));
    CHECK(cmd_indices(cfg, (dir / "no_orbits.json").string()) == kExitBadInput);
    CHECK(cmd_resonance(cfg, (dir / "no_indices.json").string()) ==
          kExitBadInput);
}

TEST_CASE("an invalid critical-type sidecar is rejected as bad input") {
    auto dir = fresh_dir("sidecar");
    auto cfg = RunConfig::from_json(base_config(dir.string()));

    nlohmann::json indices{
        {"n", 1},
        {"orbits",
         {{{"id", "y1"},
           {"n", 1},
           {"K", 2},
           {"k_unbounded", false},
           {"mean_index", 2.0},
           {"table", {{1, 0, 1}, {2, 2, 1}}}}}}};
    std::ofstream(dir / "indices.json") << indices.dump(2);
    // k_0 must stay binary
    std::ofstream(dir / "klist.json") << R"({"y1": [[2], [1]]})";

    CHECK(cmd_resonance(cfg, (dir / "indices.json").string(),
                        (dir / "klist.json").string()) == kExitBadInput);
}
