#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cchar/geometry.hpp"
#include "cchar/orbits.hpp"
#include "cchar/path.hpp"

namespace cchar {

enum class StabilityType { Hyperbolic, Elliptic, IrrationallyElliptic, Mixed };

struct Classification {
    bool degenerate = false;
    StabilityType type = StabilityType::Mixed;
};

std::string to_string(const Classification& c);

/// Monodromy of the linearized flow along a closed characteristic, together
/// with the symplectic path that produced it and its multiplier bookkeeping.
struct MonodromyData {
    ClosedCharacteristic orbit;       // empty for purely spectral data
    SymplecticPath path;              // gamma_y on [0, tau]
    SymplecticMatrix monodromy = SymplecticMatrix::identity(1);
    CircleSpectrum circle;            // unit-circle multipliers
    std::vector<Complex> off_circle;  // remaining multipliers, one per alg
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

/// Multiplier bookkeeping for a given monodromy matrix (no integration).
/// Multipliers with |.|-1 inside the marginal band pick up a warning.
MonodromyData monodromy_data(const SymplecticMatrix& m,
                             const Tolerances& tol = {});

/// Integrates the matrix linearization xi' = J H''(x(t)) xi along the
/// Hamiltonian parameterization of the orbit (cubic interpolation of the
/// stored samples), re-symplectifying whenever the drift exceeds a tenth of
/// the symplectic tolerance.
MonodromyData linearize(const HamiltonianModel& hm,
                        const ClosedCharacteristic& orbit, int samples = 256,
                        const Tolerances& tol = {});

struct TangentReport {
    double fixed_vector_residual = 0.0; ///< |R(1) xdot - xdot| / |xdot|
    double invariance_defect = 0.0;     ///< tangency loss of T_x Sigma_rho
    double gamma = 0.0;                 ///< shear coefficient, negative
    double basis_condition = 0.0;

    nlohmann::json to_json() const;
};

/// Verifies the fixed velocity vector, the invariance of the tangent space
/// of the energy level under the monodromy, and extracts the shear
/// coefficient of the (velocity, radial) plane.
TangentReport tangent_checks(const MonodromyData& md,
                             const HamiltonianModel& hm,
                             const Tolerances& tol = {});

Classification classify(const MonodromyData& md, const Tolerances& tol = {});

/// Level rho of the Hamiltonian orbit whose characteristic period is tau:
/// the unique solution of phi'(rho) / rho = tau / a.
double scaled_orbit_level(const HamiltonianModel& hm, double tau);

} // namespace cchar
