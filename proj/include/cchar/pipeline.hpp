#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cchar/geometry.hpp"
#include "cchar/tolerances.hpp"

namespace cchar {

/// Batch-run configuration. `from_json` validates every field and throws
/// RangeError naming the offending field.
struct RunConfig {
    ConvexBody body;
    std::vector<std::string> solvers = {"analytic", "shooting"};
    Tolerances tol;
    int m_max = 12;
    std::vector<long> morse_cutoffs = {250, 500, 1000, 2000};
    std::string out_dir = ".";
    unsigned long seed = 0;
    int workers = 1;
    int modes = 64;           // Fourier truncation for the dual-action solver
    double alpha = 1.5;       // Hamiltonian profile exponent
    int random_seeds = 32;    // shooting attempts
    double t_max_factor = 10; // shooting horizon, in units of 2 pi |y|^2

    static RunConfig from_json(const nlohmann::json& j);
};

/// Exit codes shared by the subcommands: 0 success, 1 bad input (malformed
/// config, missing file, invalid critical type numbers), 2 solver or
/// invariant failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 1;
inline constexpr int kExitSolver = 2;

/// Runs the selected finders, deduplicates, and writes <out>/orbits.json
/// plus a one-line-per-orbit summary on stdout.
int cmd_orbits(const RunConfig& cfg);

/// Linearizes every prime orbit from orbits_path, computes the iteration
/// profile cross-checked against the circle route, and writes
/// <out>/indices.json with the dual-shifted tables.
int cmd_indices(const RunConfig& cfg, const std::string& orbits_path);

/// Consumes indices_path, resolves critical type numbers (the sidecar
/// klist_path for degenerate orbits, empty string for none), and writes
/// resonance.json, resonance.csv, morse.csv, and morse_trend.csv.
int cmd_resonance(const RunConfig& cfg, const std::string& indices_path,
                  const std::string& klist_path = "");

} // namespace cchar
