#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cchar/symplectic.hpp"

namespace cchar {

/// A compact strictly convex hypersurface Sigma in R^{2n}, carried by its
/// gauge function j (positively 1-homogeneous, j^{-1}(1) = Sigma) with
/// gradient and Hessian away from the origin.
class ConvexBody {
  public:
    /// Sum (x_k^2 + x_{k+n}^2)/r_k^2 = 1; the k-th semi-axis r_k is shared
    /// by the conjugate coordinate pair (k, k+n).
    static ConvexBody ellipsoid(std::vector<double> semi_axes);

    /// Level set F^{-1}(1) of a smooth positive function; the gauge is
    /// recovered by solving F(x/j) = 1 and differentiating implicitly.
    static ConvexBody generic(int n, std::function<double(const Vec&)> f,
                              std::function<Vec(const Vec&)> fgrad,
                              std::function<Mat(const Vec&)> fhess);

    int n() const { return n_; }
    bool is_ellipsoid() const { return !semi_axes_.empty(); }
    const std::vector<double>& semi_axes() const { return semi_axes_; }

    double gauge(const Vec& x) const;
    Vec gauge_grad(const Vec& x) const;
    Mat gauge_hess(const Vec& x) const;

    /// Outward normal normalized by N(y) . y = 1; equals gauge_grad on Sigma.
    Vec normal(const Vec& y) const { return gauge_grad(y); }

    /// Radial projection x -> x / j(x) onto Sigma.
    Vec project(const Vec& x) const;

    nlohmann::json to_json() const;
    static ConvexBody from_json(const nlohmann::json& spec);

    ConvexBody() = default; ///< empty body, only valid as a member placeholder

  private:
    void validate() const;

    int n_ = 0;
    std::vector<double> semi_axes_; // empty for generic bodies
    std::function<double(const Vec&)> f_;
    std::function<Vec(const Vec&)> fgrad_;
    std::function<Mat(const Vec&)> fhess_;
    std::vector<std::pair<double, std::vector<int>>> terms_; // json round-trip
    friend ConvexBody body_from_polynomial(
        int, const std::vector<std::pair<double, std::vector<int>>>&);
};

/// The auxiliary profile of the Hamiltonian: a strictly convex function with
/// phi(0) = phi'(0) = 0, phi''(0) = 1, a t^alpha core, and a quadratic tail,
/// so that phi'(t)/t decreases strictly from 1 to a value below vartheta.
class PhiFunction {
  public:
    double vartheta = 0.0;
    double alpha = 0.0;
    double c = 0.0;      ///< core coefficient, 1/(alpha^2 - 7 alpha + 12)
    double T = 0.0;      ///< splice point where the quadratic tail starts
    double sigma = 0.0;  ///< uniform lower bound of min(phi'(t)/t, phi''(t))
    bool homogeneous_core = false;

    double value(double t) const;
    double deriv(double t) const;
    double deriv2(double t) const;

    /// Safeguarded inversion of the strictly increasing phi' on (0, inf).
    double invert_deriv(double target) const;

  private:
    friend PhiFunction build_phi(double, double, bool);
    double head(double t, int d) const;  // scaled quartic on [0, 1]
    double core(double t, int d) const;  // c t^alpha on [1, T]
    double tail(double t, int d) const;  // quadratic Taylor of the core at T
    double raw(double t, int d) const;
    double eval(double t, int d) const;  // with quintic blending at {1, T}
    double blend_radius_ = 1e-3;
};

/// Constructs the profile for the given vartheta and alpha. With
/// homogeneous_core set, the exact-power window phi = c t^alpha on
/// [1 + delta, T - delta] is certified, which requires alpha close enough
/// to 2 that phi'(t)/t stays above 1 - vartheta on [0, 1].
PhiFunction build_phi(double vartheta, double alpha, bool homogeneous_core);

/// H = a phi(j(x)) (the fixed-period model) or H = j(x)^alpha (the
/// homogeneous model).
struct HamiltonianModel {
    enum class Form { Scaled, PureHomogeneous };
    ConvexBody body;
    Form form = Form::Scaled;
    double a = 0.0;       // Scaled
    PhiFunction phi;      // Scaled
    double alpha = 0.0;   // PureHomogeneous
    double r = 0.0;       ///< sampled Hessian lower bound
    double R = 0.0;       ///< sampled Hessian upper bound

    static HamiltonianModel scaled(ConvexBody body, double a, PhiFunction phi);
    static HamiltonianModel homogeneous(ConvexBody body, double alpha);
};

struct HamiltonianEval {
    double value;
    Vec gradient;
    Mat hessian;
};

/// Value, gradient, and Hessian of the model at x via the chain rule in the
/// gauge. The Hessian is singular at x = 0 and requesting it there throws.
HamiltonianEval hamiltonian_eval(const HamiltonianModel& hm, const Vec& x,
                                 bool with_hessian = true);

/// The Fenchel transform G = H*: G(y) = sup_x (x.y - H(x)).
class FenchelDual {
  public:
    double value(const Vec& y) const;
    Vec grad(const Vec& y) const;
    Mat hess(const Vec& y) const;

    const HamiltonianModel& source() const { return *hm_; }
    double beta() const { return beta_; }  ///< conjugate exponent (homogeneous)
    double c1() const { return c1_; }      ///< G(mu j'(z)) = c1 mu^beta

  private:
    friend FenchelDual fenchel(const HamiltonianModel&);
    /// x with H'(x) = y: the supporting point on Sigma scaled through the
    /// inverse of phi'.
    Vec primal_point(const Vec& y) const;
    std::shared_ptr<const HamiltonianModel> hm_;
    double beta_ = 0.0;
    double c1_ = 0.0;
};

FenchelDual fenchel(const HamiltonianModel& hm);

} // namespace cchar
