#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cchar/symplectic.hpp"

namespace cchar {

/// One diamond factor of a path: a continuous map [0,tau] -> Sp(2n) given by
/// a dense evaluator, with optional analytic derivative and a list of interior
/// times where the derivative may jump.
struct PathFactor {
    int n = 1;
    double tau = 1.0;
    std::function<Mat(double)> value;
    std::function<Mat(double)> deriv; // optional
    std::vector<double> breakpoints;  // interior C^1 junctions
};

/// gamma'(t) by the analytic derivative when present, otherwise a central
/// difference. side > 0 evaluates the right derivative, side < 0 the left.
Mat factor_derivative(const PathFactor& f, double t, int side = 0);

/// B(t) = -J gamma'(t) gamma(t)^{-1}, the symmetric coefficient of the linear
/// Hamiltonian system the path solves. Symmetrized; throws NumericalError when
/// the asymmetry is large.
Mat factor_bfield(const PathFactor& f, double t, int side = 0);

/// A path gamma: [0,tau] -> Sp(2n) with gamma(0) = I, stored as a diamond
/// product of factors so that index computations can work blockwise.
class SymplecticPath {
  public:
    static SymplecticPath from_factor(PathFactor f);
    static SymplecticPath from_evaluator(int n, double tau,
                                         std::function<Mat(double)> value,
                                         std::function<Mat(double)> deriv = {});
    /// Uniformly spaced samples (first = I); evaluates between samples by
    /// M_k exp(s log(M_k^{-1} M_{k+1})).
    static SymplecticPath from_samples(double tau, std::vector<Mat> samples);

    int n() const { return n_; }
    double tau() const { return tau_; }
    const std::vector<PathFactor>& factors() const { return factors_; }

    Mat at(double t) const;
    SymplecticMatrix endpoint() const;

    /// count+1 uniform samples (t_k, gamma(t_k)) starting at (0, I).
    std::vector<std::pair<double, Mat>> samples(int count) const;

    /// gamma(t) exp(-delta (t/tau) J), factorwise.
    SymplecticPath twist(double delta) const;

    friend SymplecticPath diamond(const SymplecticPath& a,
                                  const SymplecticPath& b);

  private:
    int n_ = 0;
    double tau_ = 0.0;
    std::vector<PathFactor> factors_;
};

SymplecticPath diamond(const SymplecticPath& a, const SymplecticPath& b);

/// m-th iteration: gamma^m(t) = gamma(t - j tau) gamma(tau)^j on
/// [j tau, (j+1) tau].
SymplecticPath iterate_path(const SymplecticPath& gamma, int m);

/// Canonical generator path from I to the realization of the normal form:
/// rotations sweep linearly, hyperbolic blocks follow exp(t log D), Jordan
/// blocks grow their off-diagonal entry linearly, and negative-eigenvalue
/// forms carry a half-turn rotation.
SymplecticPath generator_path(const BasicNormalForm& nf, double tau = 1.0);
SymplecticPath generator_path(const std::vector<BasicNormalForm>& nfs,
                              double tau = 1.0);

/// The scaling path xi_n(t) = diag(2 - t, (2 - t)^{-1})^{diamond n}, t in
/// [0,1], running from diag(2,1/2)^{diamond n} to I. Returned as a bare
/// factor because it does not start at the identity.
PathFactor xi_path(int n);

} // namespace cchar
