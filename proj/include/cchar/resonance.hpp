#pragma once

#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>
#include <nlohmann/json_fwd.hpp>

#include "cchar/errors.hpp"
#include "cchar/floquet.hpp"
#include "cchar/index.hpp"

namespace cchar {

using Rational = boost::rational<long long>;

double to_double(const Rational& r);

/// Iteration data of one prime orbit after the dual-variational index shift:
/// (m, i(y^m), nu(y^m)) with i(y^m) = i(y,m) - n.
struct OrbitIndexData {
    std::string id;
    int n = 0;
    long K = 2;
    bool k_unbounded = false;
    double mean_index = 0.0;                 // shift-invariant
    std::vector<std::array<long, 3>> table;  // m ascending from 1

    long index_at(long m) const;    // throws DepthError past the table
    int nullity_at(long m) const;

    nlohmann::json to_json() const;
    static OrbitIndexData from_json(const nlohmann::json& j);
};

/// Shifted data assembled from an iteration profile.
OrbitIndexData shifted_orbit_data(std::string id, const IndexProfile& profile);

/// Local critical-level dimensions k_l(y^m) for m = 1..K, l = 0..2n-2.
/// These are validated inputs: the library never computes them for
/// degenerate iterates.
struct CriticalTypeNumbers {
    std::vector<std::vector<long>> k;  // k[m-1][l]
};

/// Constraint check against the orbit's nullities. Throws InvariantViolation
/// naming the violated rule:
///   support           k_l = 0 outside [0, nu(y^m) - 1]
///   boundary-binary   k_0 and k_{nu-1} take only 0 or 1
///   bottom-exclusion  k_0 = 1 forces every higher k_l to vanish
///   top-exclusion     k_{nu-1} = 1 forces every lower k_l to vanish
///   interior-exclusion  an interior k_l >= 1 forces k_0 = k_{nu-1} = 0
///   low-nullity-single  at most one nonzero entry when nu <= 3
void validate_type_numbers(const CriticalTypeNumbers& k,
                           const OrbitIndexData& orbit);

/// The canonical pattern when every iterate is non-degenerate: K = 2 and
/// k_0(y^m) = 1 exactly when i(y^m) - i(y) is even.
CriticalTypeNumbers nondegenerate_type_numbers(const OrbitIndexData& orbit);

struct EulerCharacteristic {
    std::vector<long> per_m;  // chi(y^m) for m = 1..K
    Rational chi_hat;         // (1/K) sum of per_m
};

/// chi(y^m) = sum_l (-1)^{i(y^m)+l} k_l(y^m), averaged exactly over one
/// K-period. Exact integer/rational arithmetic throughout.
EulerCharacteristic euler_characteristic(const OrbitIndexData& orbit,
                                         const CriticalTypeNumbers& k);

/// Closed form for the all-iterates-non-degenerate case from the parities of
/// i(y) and i(y^2): +-1 when the index gap is even, +-1/2 otherwise.
Rational nondegenerate_chi(const OrbitIndexData& orbit);

struct ResonanceReport {
    struct Entry {
        std::string id;
        double mean_index;
        Rational chi_hat;
        double contribution;  // chi_hat / mean_index
    };
    std::vector<Entry> orbits;
    double total = 0.0;
    double residual = 0.0;  // |total - 1/2|

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Sum of chi_hat / i_hat over geometrically distinct orbits, folded in
/// orbit-id order. chi_hat stays exact, the division is binary64.
ResonanceReport resonance_sum(
    const std::vector<std::pair<OrbitIndexData, Rational>>& orbits);

struct MorseCounts {
    long cutoff = 0;              // I
    std::vector<long> w;          // w_h for h = 0..I+1
    long alternating = 0;         // sum_{h<=I} (-1)^h w_h
    double per_h_bound = 0.0;     // uniform bound every w_h must respect

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Degree-h multiplicities of the formal Morse series: w_h counts the
/// iterates s >= 0 with i(y^{sK+m}) + l = h, weighted by k_l(y^m). Requires
/// tables deep enough that the index has climbed past the cutoff.
MorseCounts morse_counts(
    const std::vector<std::pair<OrbitIndexData, CriticalTypeNumbers>>& orbits,
    long cutoff);

struct MorseTrend {
    std::vector<std::pair<long, double>> series;  // (I, alternating / I)
    double slope = 0.0;  // least-squares slope of alternating vs I
};

MorseTrend morse_trend(
    const std::vector<std::pair<OrbitIndexData, CriticalTypeNumbers>>& orbits,
    const std::vector<long>& cutoffs);

struct OrbitStabilityData {
    std::string id;
    Classification cls;
    long i1 = 0;          // i(y,1), before the shift
    int nu1 = 0;
    int s_plus_one = 0;   // S+ at omega = 1
};

struct StabilityAudit {
    int orbit_count = 0;
    long rho_lower_bound = 0;   // min over orbits of floor((i1+2S+-nu1+n)/2)
    bool two_orbit_rule = false;   // n = 2 with exactly two orbits
    bool three_orbit_rule = false; // n = 3
    std::vector<std::string> violations;

    bool pass() const { return violations.empty(); }
    nlohmann::json to_json() const;
};

/// Consistency report: with two orbits in R^4 both must be irrationally
/// elliptic; in R^6 at least three distinct orbits must be present; the
/// per-orbit lower bound floor((i(y,1) + 2S+ - nu(y,1) + n)/2) is tabulated.
StabilityAudit stability_audit(const std::vector<OrbitStabilityData>& orbits,
                               int n);

} // namespace cchar
