#pragma once

namespace cchar {

/// Numerical thresholds shared across the library. Monodromy matrices come
/// out of ODE integration with roughly 1e-9 drift, which sets the defaults.
struct Tolerances {
    double symp = 1e-10;        ///< symplecticity defect bound
    double eig = 1e-8;          ///< distance to the unit circle for spectrum snapping
    double rank_rel = 1e-8;     ///< relative singular-value threshold for kernels
    double mean_tol = 1e-6;     ///< agreement required between mean-index routes
    double perturb_delta = 1e-3;///< angle used for degenerate-endpoint and splitting limits
    int max_refine = 60;        ///< bisection doublings when isolating crossings
    int q_max = 64;             ///< denominator cap for rational rotation angles
    double angle_tol = 1e-9;    ///< acceptance tolerance for the rational-angle detector
    double path_resolution = 0.25; ///< max sample gap as a fraction of the period
};

} // namespace cchar
