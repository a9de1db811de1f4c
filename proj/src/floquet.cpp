#include "cchar/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"
#include "cchar/index.hpp"

namespace cchar {

namespace {

/// Periodic cubic (4-point Lagrange) interpolation of the orbit samples.
class OrbitInterp {
  public:
    explicit OrbitInterp(const ClosedCharacteristic& orbit)
        : tau_(orbit.tau), pts_(orbit.points) {
        if (pts_.size() < 5) throw RangeError("linearize: too few samples");
        m_ = pts_.size() - 1; // last sample repeats the first
    }

    Vec at(double s) const {
        double u = s / tau_ * static_cast<double>(m_);
        double cell = std::floor(u);
        u -= cell;
        const long i = static_cast<long>(cell);
        auto p = [&](long k) -> const Vec& {
            long idx = ((i + k) % static_cast<long>(m_) + m_) % m_;
            return pts_[idx];
        };
        const double w0 = -u * (u - 1) * (u - 2) / 6.0;
        const double w1 = (u + 1) * (u - 1) * (u - 2) / 2.0;
        const double w2 = -(u + 1) * u * (u - 2) / 2.0;
        const double w3 = (u + 1) * u * (u - 1) / 6.0;
        return w0 * p(-1) + w1 * p(0) + w2 * p(1) + w3 * p(2);
    }

  private:
    double tau_;
    std::size_t m_;
    std::vector<Vec> pts_;
};

/// Projects a near-symplectic matrix back onto Sp(2n):
/// M <- M X^{-1/2} with X = -J (M^T J M), a second-order series in X - I.
Mat resymplectify(const Mat& m) {
    const int n = static_cast<int>(m.rows()) / 2;
    const Mat j = standard_J(n);
    Mat x = -j * (m.transpose() * j * m);
    Mat e = x - Mat::Identity(2 * n, 2 * n);
    Mat inv_sqrt = Mat::Identity(2 * n, 2 * n) - 0.5 * e + 0.375 * e * e;
    return m * inv_sqrt;
}

} // namespace

double scaled_orbit_level(const HamiltonianModel& hm, double tau) {
    if (hm.form != HamiltonianModel::Form::Scaled) {
        throw RangeError("scaled_orbit_level: requires the scaled model");
    }
    const double target = tau / hm.a;
    if (!(target > 0 && target < 1)) {
        throw RangeError("scaled_orbit_level: period outside (0, a)");
    }
    auto ratio = [&](double t) { return hm.phi.deriv(t) / t; };
    double lo = 1e-12, hi = 1.0;
    while (ratio(hi) > target) {
        hi *= 2.0;
        if (hi > 1e300) {
            throw RangeError("scaled_orbit_level: period below the profile's "
                             "reachable range");
        }
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

MonodromyData monodromy_data(const SymplecticMatrix& m, const Tolerances& tol) {
    MonodromyData md;
    md.monodromy = m;
    md.circle = circle_spectrum(m, tol);

    md.off_circle = off_circle_spectrum(m, tol);

    Eigen::EigenSolver<Mat> es(m.entries());
    const double marginal_band = std::max(1e-4, 100.0 * tol.eig);
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const Complex ev = es.eigenvalues()(i);
        const double dist = std::abs(std::abs(ev) - 1.0);
        if (dist > tol.eig && dist <= marginal_band) {
            md.warnings.push_back(
                "marginal multiplier at distance " + std::to_string(dist) +
                " from the unit circle");
        }
    }

    // spectrum must pair off under conjugation and inversion
    std::vector<Complex> pool = md.off_circle;
    for (const Complex& ev : md.off_circle) {
        for (Complex target : {std::conj(ev), 1.0 / ev}) {
            double best = 1e300;
            for (const Complex& cand : pool) {
                best = std::min(best, std::abs(cand - target));
            }
            if (best > 1e-5 * std::max(1.0, std::abs(target))) {
                throw InvariantViolation(
                    "monodromy spectrum is not closed under conjugation and "
                    "inversion");
            }
        }
    }
    return md;
}

MonodromyData linearize(const HamiltonianModel& hm,
                        const ClosedCharacteristic& orbit, int samples,
                        const Tolerances& tol) {
    if (orbit.residual > 1e-7) {
        throw RangeError("linearize: orbit residual too large");
    }
    if (samples < 8) throw RangeError("linearize: need at least 8 samples");
    const int n = hm.body.n();
    const int dim = 2 * n;
    const double tau = orbit.tau;

    double rho = 1.0, speed = 0.0;
    if (hm.form == HamiltonianModel::Form::Scaled) {
        rho = scaled_orbit_level(hm, tau);
        speed = hm.a * hm.phi.deriv(rho) / rho; // = tau by construction
    } else {
        speed = hm.alpha; // H = j^alpha restricted to Sigma
    }

    OrbitInterp interp(orbit);
    const Mat j = standard_J(n);
    auto rhs_mat = [&](const Mat& g, double s) {
        const Vec x = rho * interp.at(s);
        Mat h = hamiltonian_eval(hm, x, true).hessian;
        return Mat((j * h) * g / speed);
    };

    using State = std::vector<double>;
    auto pack = [&](const Mat& g) { return State(g.data(), g.data() + dim * dim); };
    auto unpack = [&](const State& s) {
        return Mat(Eigen::Map<const Mat>(s.data(), dim, dim));
    };

    auto stepper = boost::numeric::odeint::make_controlled(
        1e-12, 1e-12, boost::numeric::odeint::runge_kutta_fehlberg78<State>());
    auto flow = [&](const State& s, State& dsdt, double t) {
        Mat d = rhs_mat(unpack(s), t);
        dsdt.assign(d.data(), d.data() + dim * dim);
    };

    std::vector<Mat> path_samples;
    Mat g = Mat::Identity(dim, dim);
    path_samples.push_back(g);
    for (int i = 1; i <= samples; ++i) {
        const double s0 = tau * (i - 1) / samples;
        const double s1 = tau * i / samples;
        State st = pack(g);
        try {
            boost::numeric::odeint::integrate_adaptive(stepper, flow, st, s0,
                                                       s1, (s1 - s0) / 16.0);
        } catch (const std::exception& e) {
            throw IntegratorError(std::string("linearize: ") + e.what());
        }
        g = unpack(st);
        if (symplectic_defect(g) > tol.symp / 10.0) {
            g = resymplectify(g);
            if (symplectic_defect(g) > tol.symp) {
                throw IntegratorError(
                    "linearize: symplectic drift persists after projection");
            }
        }
        path_samples.push_back(g);
    }

    MonodromyData md = monodromy_data(SymplecticMatrix(g, tol.symp), tol);
    md.orbit = orbit;
    md.path = SymplecticPath::from_samples(tau, std::move(path_samples));
    return md;
}

TangentReport tangent_checks(const MonodromyData& md,
                             const HamiltonianModel& hm,
                             const Tolerances& tol) {
    (void)tol;
    if (hm.form != HamiltonianModel::Form::Scaled) {
        throw RangeError("tangent_checks: requires the scaled model");
    }
    if (md.orbit.points.empty()) {
        throw RangeError("tangent_checks: monodromy carries no orbit");
    }
    const int dim = 2 * hm.body.n();
    const double tau = md.orbit.tau;
    const double rho = scaled_orbit_level(hm, tau);
    const Vec y0 = md.orbit.points.front();
    const Vec x0 = rho * y0;
    const Mat j = standard_J(hm.body.n());
    const Vec grad = hm.body.gauge_grad(y0); // = gauge_grad at x0
    const Vec xdot = tau * rho * (j * grad); // Hamiltonian velocity at x0
    const Mat& r1 = md.monodromy.entries();

    TangentReport rep;
    rep.fixed_vector_residual = (r1 * xdot - xdot).norm() / xdot.norm();

    // invariance of the tangent space {v : H'(x0) . v = 0}
    Vec w = grad / grad.norm();
    Eigen::FullPivHouseholderQR<Mat> qr{Mat(w)};
    Mat q = qr.matrixQ();
    double defect = 0.0;
    for (int k = 1; k < dim; ++k) {
        Vec img = r1 * q.col(k);
        defect = std::max(defect, std::abs(w.dot(img)) / img.norm());
    }
    rep.invariance_defect = defect;

    // shear: R(1) x0 = x0 + gamma xdot modulo the rest of the basis
    Mat span(dim, 2);
    span.col(0) = xdot;
    span.col(1) = x0;
    Eigen::FullPivHouseholderQR<Mat> qr2(span);
    Mat q2 = qr2.matrixQ();
    Mat basis(dim, dim);
    basis.col(0) = xdot;
    basis.col(1) = x0;
    for (int k = 2; k < dim; ++k) basis.col(k) = q2.col(k);
    Eigen::JacobiSVD<Mat> svd(basis, Eigen::ComputeThinU | Eigen::ComputeThinV);
    rep.basis_condition = svd.singularValues()(0) /
                          svd.singularValues()(dim - 1);
    if (rep.basis_condition > 1e8) {
        throw NumericalError("tangent_checks: extraction basis is "
                             "ill-conditioned");
    }
    Vec coeffs = svd.solve(Vec(r1 * x0));
    rep.gamma = coeffs(0);
    return rep;
}

Classification classify(const MonodromyData& md, const Tolerances& tol) {
    Classification c;
    int alg_at_one = 0;
    for (const auto& e : md.circle.eigenvalues) {
        if (e.omega == Complex(1.0, 0.0)) alg_at_one = e.alg;
    }
    c.degenerate = alg_at_one != 2;

    if (md.off_circle.empty()) {
        c.type = StabilityType::Elliptic;
        if (!c.degenerate) {
            bool irrational = true;
            for (const auto& e : md.circle.eigenvalues) {
                if (e.omega == Complex(1.0, 0.0)) continue;
                double frac = std::arg(e.omega) / (2.0 * std::numbers::pi);
                if (frac < 0) frac += 1.0;
                if (rational_angle(frac, tol.q_max, tol.angle_tol)) {
                    irrational = false;
                    break;
                }
            }
            if (irrational) c.type = StabilityType::IrrationallyElliptic;
        }
    } else if (md.circle.total_alg() == 2 && alg_at_one == 2) {
        c.type = StabilityType::Hyperbolic;
    } else {
        c.type = StabilityType::Mixed;
    }
    return c;
}

std::string to_string(const Classification& c) {
    std::string s = c.degenerate ? "degenerate " : "non-degenerate ";
    switch (c.type) {
        case StabilityType::Hyperbolic: return s + "hyperbolic";
        case StabilityType::Elliptic: return s + "elliptic";
        case StabilityType::IrrationallyElliptic:
            return s + "irrationally-elliptic";
        default: return s + "mixed";
    }
}

nlohmann::json MonodromyData::to_json() const {
    nlohmann::json mult = nlohmann::json::array();
    for (const auto& e : circle.eigenvalues) {
        mult.push_back({{"re", e.omega.real()},
                        {"im", e.omega.imag()},
                        {"alg", e.alg},
                        {"geom", e.geom}});
    }
    for (const Complex& ev : off_circle) {
        mult.push_back(
            {{"re", ev.real()}, {"im", ev.imag()}, {"alg", 1}, {"geom", 1}});
    }
    return nlohmann::json{{"matrix", cchar::to_json(monodromy)},
                          {"multipliers", mult},
                          {"classification", to_string(classify(*this))},
                          {"warnings", warnings}};
}

nlohmann::json TangentReport::to_json() const {
    return nlohmann::json{{"fixed_vector_residual", fixed_vector_residual},
                          {"invariance_defect", invariance_defect},
                          {"gamma", gamma},
                          {"basis_condition", basis_condition}};
}

} // namespace cchar
