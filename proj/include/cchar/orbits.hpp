#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cchar/geometry.hpp"
#include "cchar/tolerances.hpp"

namespace cchar {

/// A closed solution (tau, y) of y' = J N_Sigma(y) on Sigma, stored as a
/// dense sampling of one period.
struct ClosedCharacteristic {
    enum class Source { Analytic, Shooting, DualAction };
    double tau = 0.0;
    std::vector<double> times;   // ascending, times.front() == 0
    std::vector<Vec> points;     // same length, on Sigma
    int multiplicity = 1;        // m relative to the detected prime orbit
    Source source = Source::Analytic;
    double residual = 0.0;       // max |y' - J N(y)| over samples

    nlohmann::json to_json() const;
    static ClosedCharacteristic from_json(const nlohmann::json& j);
};

/// Checks the on-surface, closure, and residual invariants; throws
/// InvariantViolation with the failing quantity otherwise.
void validate_orbit(const ConvexBody& body, const ClosedCharacteristic& orbit,
                    double close_tol = 1e-8);

/// Mean-zero loop u(t) = sum_{0 < |k| <= N} e^{2 pi k J t} x_k.
class FourierLoop {
  public:
    FourierLoop(int n, int n_modes);

    int n() const { return n_; }
    int modes() const { return n_modes_; }

    /// Coefficient x_k for k in [-N, -1] or [1, N].
    Vec& coeff(int k);
    const Vec& coeff(int k) const;

    Vec value(double t) const;     // u(t)
    Vec primitive(double t) const; // Mu(t), the mean-zero primitive
    double norm2() const;          // integral of |u|^2

  private:
    int n_ = 0;
    int n_modes_ = 0;
    std::vector<Vec> coeffs_; // index k -> slot (k < 0 ? N + k : N - 1 + k)
};

/// The n planar circular orbits of an ellipsoid, periods 2 pi r_k^2.
/// Requires pairwise irrational squared-axis ratios; otherwise closed
/// characteristics come in continuous families and enumeration is refused.
std::vector<ClosedCharacteristic> ellipsoid_orbits(const ConvexBody& body,
                                                   int samples_per_orbit = 256,
                                                   const Tolerances& tol = {});

/// Integrates the characteristic flow from a seed on Sigma, watches for
/// returns through the transverse hyperplane at the seed, and polishes any
/// approximate return with Newton on the return map. Returns nothing when no
/// return closes within t_max.
std::optional<ClosedCharacteristic> shoot(const ConvexBody& body,
                                          const Vec& seed, double t_max,
                                          const Tolerances& tol = {});

struct DualActionResult {
    FourierLoop loop;
    ClosedCharacteristic orbit;
    double action = 0.0; ///< Psi_a at the critical point, always negative
};

/// Minimizes the dual action Psi_a(u) = int (J u . M u / 2 + G_a(-J u))
/// over truncated Fourier loops; reconstructs the orbit through x = Mu + c
/// and the gauge rescaling. Returns nothing when the descent collapses to
/// the trivial loop.
std::optional<DualActionResult> dual_action(const HamiltonianModel& hm,
                                            const FourierLoop& loop0,
                                            const Tolerances& tol = {});

/// Groups orbits with the same trajectory point set (Hausdorff distance
/// after alignment below 1e-6 of the diameter), keeps the minimal-period
/// representative of each group, and annotates the rest as iterates.
std::vector<ClosedCharacteristic> deduplicate(
    std::vector<ClosedCharacteristic> orbits);

} // namespace cchar
