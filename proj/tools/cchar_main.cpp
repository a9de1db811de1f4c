#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/pipeline.hpp"

namespace {

cchar::RunConfig load_config(const std::string& path,
                             const CLI::App& app,
                             const std::string& out_dir, long seed,
                             long workers, long m_max, long modes) {
    std::ifstream in(path);
    if (!in) throw cchar::RangeError("cannot open config '" + path + "'");
    nlohmann::json j;
    in >> j;
    auto cfg = cchar::RunConfig::from_json(j);
    if (app.count("--out")) cfg.out_dir = out_dir;
    if (app.count("--seed")) cfg.seed = static_cast<unsigned long>(seed);
    if (app.count("--workers")) cfg.workers = static_cast<int>(workers);
    if (app.count("--m-max")) cfg.m_max = static_cast<int>(m_max);
    if (app.count("--modes")) cfg.modes = static_cast<int>(modes);
    if (cfg.m_max < 2) throw cchar::RangeError("config: field 'm_max' must be >= 2");
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"closed characteristics on convex hypersurfaces"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", orbits_path, indices_path,
                klist_path;
    long seed = 0, workers = 1, m_max = 12, modes = 64;
    app.add_option("--config", config_path, "run configuration JSON")
        ->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--workers", workers, "worker count");
    app.add_option("--m-max", m_max, "iteration depth for direct tables");
    app.add_option("--modes", modes, "Fourier truncation");

    auto* orbits = app.add_subcommand("orbits", "find closed characteristics");
    auto* indices =
        app.add_subcommand("indices", "monodromy and index profiles");
    indices->add_option("--orbits", orbits_path, "orbits.json from `orbits`");
    auto* resonance =
        app.add_subcommand("resonance", "resonance identity and Morse data");
    resonance->add_option("--indices", indices_path,
                          "indices.json from `indices`");
    resonance->add_option("--klist", klist_path,
                          "critical-type-number sidecar for degenerate orbits");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load_config(config_path, app, out_dir, seed, workers,
                               m_max, modes);
        if (orbits->parsed()) return cchar::cmd_orbits(cfg);
        if (indices->parsed()) {
            if (orbits_path.empty()) orbits_path = cfg.out_dir + "/orbits.json";
            return cchar::cmd_indices(cfg, orbits_path);
        }
        if (indices_path.empty()) indices_path = cfg.out_dir + "/indices.json";
        return cchar::cmd_resonance(cfg, indices_path, klist_path);
    } catch (const cchar::RangeError& e) {
        std::cerr << e.what() << '\n';
        return cchar::kExitBadInput;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config: " << e.what() << '\n';
        return cchar::kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return cchar::kExitSolver;
    }
}
