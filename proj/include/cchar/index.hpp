#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cchar/path.hpp"
#include "cchar/symplectic.hpp"

namespace cchar {

struct OmegaIndex {
    long index;
    int nullity;
};

/// The omega-index and nullity of a symplectic path: the homotopy
/// intersection number of the scaling-extended path with the hypersurface
/// {D_omega = 0}, evaluated through crossing forms. At every time where
/// gamma(t) has omega in its spectrum, the Hermitian form
/// v -> v* B(t) v on the omega-eigenspace (B = -J gamma' gamma^{-1})
/// contributes its signature — halved at the two endpoints — and the index
/// is that total minus half the terminal nullity, which realizes the
/// lower-semicontinuous convention for degenerate endpoints.
OmegaIndex omega_index(const SymplecticPath& gamma, Complex omega,
                       const Tolerances& tol = {});

/// One-sided jumps of omega -> index at omega: S+- = i(omega e^{+-i delta})
/// - i(omega), certified stable under halving delta.
std::pair<int, int> splitting_numbers(const SymplecticMatrix& m, Complex omega,
                                      const SymplecticPath& generator,
                                      const Tolerances& tol = {});

struct SplittingEntry {
    Complex omega;
    int s_plus;
    int s_minus;
};

struct IndexProfile {
    long i1 = 0;
    int nu1 = 0;
    std::vector<std::array<long, 3>> table; // (m, i, nu)
    double mean_index = 0.0;
    std::vector<SplittingEntry> splitting;
    long K = 2;
    bool k_unbounded = false;   // rational-angle detection hit the cap
    bool single_source = false; // mean index not cross-checked
    int n = 0;

    nlohmann::json to_json() const;
};

/// Full iteration data: (i, nu) for m = 1..m_max by direct iteration, mean
/// index by circle-arc averaging cross-checked against the rotation-angle
/// route, splitting numbers at every circle eigenvalue, and the period K.
IndexProfile iteration_profile(const SymplecticPath& gamma, int m_max,
                               const Tolerances& tol = {});

/// Dual-variational index shift: i |-> i - n, nullities and mean unchanged.
std::vector<std::array<long, 3>> ekeland_index(const IndexProfile& profile,
                                               int n);

/// The step function omega -> (i_omega, nu_omega) on the unit circle:
/// eigenvalue angles of gamma(tau), the index and nullity at each, and the
/// constant index on every open arc between consecutive angles. Once built,
/// the index of any iterate follows from counting roots of unity per arc,
/// without re-walking iterated paths.
struct CircleIndexData {
    int n = 0;
    std::vector<double> angles;  // sorted eigenvalue angles in [0, 2pi)
    std::vector<long> i_at;      // omega-index at e^{i angles[k]}
    std::vector<int> nu_at;
    std::vector<long> i_arc;     // on the arc following angles[k] (wrapping);
                                 // with no circle eigenvalue, the single
                                 // constant value

    long index_at_angle(double phi) const;
    int nullity_at_angle(double phi) const;
    /// Arc-length average of the index, the mean index per period.
    double mean() const;
};

CircleIndexData circle_index_data(const SymplecticPath& gamma,
                                  const Tolerances& tol = {});

/// (m, i(gamma,m), nu(gamma,m)) for m = 1..m_max via the Bott sum of the
/// omega-index over the m-th roots of unity.
std::vector<std::array<long, 3>> bott_iteration_table(
    const CircleIndexData& data, int m_max);

/// Mean index per period: average of the omega-index over the unit circle,
/// evaluated exactly on the arcs between eigenvalue angles of gamma(tau).
double mean_index(const SymplecticPath& gamma, const Tolerances& tol = {});

/// Basic-normal-form list with the same circle spectrum and nullities as M.
/// Order: N1(1,.), N1(-1,.), R ascending angle, D(2), D(-2).
std::vector<BasicNormalForm> normal_form_decomposition(const SymplecticMatrix& m,
                                                       const Tolerances& tol = {});

/// Best rational p/q with q <= q_max approximating x within tol, via
/// continued fractions. Returns nothing when x is not resolved rational.
std::optional<std::pair<long, long>> rational_angle(double x, int q_max,
                                                    double tol);

/// Twice the lcm of the denominators of the rational rotation angles of M.
/// Sets unbounded when an angle matches only at the denominator cap.
std::pair<long, bool> minimal_period_K(const SymplecticMatrix& m,
                                       const Tolerances& tol = {});

} // namespace cchar
