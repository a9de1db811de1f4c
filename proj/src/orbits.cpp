#include "cchar/orbits.hpp"

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

constexpr double kPi = std::numbers::pi;

Vec apply_J(const Vec& x) {
    const int n = static_cast<int>(x.size()) / 2;
    Vec out(2 * n);
    out.head(n) = -x.tail(n);
    out.tail(n) = x.head(n);
    return out;
}

using State = std::vector<double>;

Vec to_vec(const State& s) {
    return Eigen::Map<const Vec>(s.data(), static_cast<long>(s.size()));
}

State to_state(const Vec& v) {
    return State(v.data(), v.data() + v.size());
}

struct CharacteristicFlow {
    const ConvexBody* body;
    void operator()(const State& y, State& dydt, double) const {
        Vec f = apply_J(body->gauge_grad(to_vec(y)));
        dydt.assign(f.data(), f.data() + f.size());
    }
};

auto make_stepper() {
    using namespace boost::numeric::odeint;
    return make_controlled(1e-12, 1e-12, runge_kutta_fehlberg78<State>());
}

/// y(t0 + dt) by adaptive eighth-order integration.
Vec advance(const ConvexBody& body, const Vec& y0, double dt) {
    if (dt == 0.0) return y0;
    State s = to_state(y0);
    auto stepper = make_stepper();
    CharacteristicFlow flow{&body};
    try {
        boost::numeric::odeint::integrate_adaptive(stepper, flow, s, 0.0, dt,
                                                   dt / 64.0);
    } catch (const std::exception& e) {
        throw IntegratorError(std::string("advance: ") + e.what());
    }
    return to_vec(s);
}

/// Return-map Jacobian d y(T)/d y0 by central differences.
Mat flow_jacobian(const ConvexBody& body, const Vec& y0, double t) {
    const int dim = static_cast<int>(y0.size());
    Mat m(dim, dim);
    const double h = 1e-7;
    for (int i = 0; i < dim; ++i) {
        Vec e = Vec::Zero(dim);
        e(i) = h;
        m.col(i) = (advance(body, y0 + e, t) - advance(body, y0 - e, t)) /
                   (2.0 * h);
    }
    return m;
}

double orbit_diameter(const ClosedCharacteristic& o) {
    double d = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, o.points.size() / 64);
    for (std::size_t i = 0; i < o.points.size(); i += stride)
        for (std::size_t k = i + 1; k < o.points.size(); k += stride)
            d = std::max(d, (o.points[i] - o.points[k]).norm());
    return d;
}

double hausdorff(const ClosedCharacteristic& a, const ClosedCharacteristic& b) {
    // distance to the closed polyline through q's samples, so that the same
    // trajectory sampled at different phases or densities still registers
    auto one_sided = [](const ClosedCharacteristic& p,
                        const ClosedCharacteristic& q) {
        double worst = 0.0;
        for (const Vec& x : p.points) {
            double best = 1e300;
            for (std::size_t k = 0; k + 1 < q.points.size(); ++k) {
                const Vec& y0 = q.points[k];
                Vec d = q.points[k + 1] - y0;
                const double len2 = d.squaredNorm();
                double t = len2 > 0 ? (x - y0).dot(d) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                best = std::min(best, (x - y0 - t * d).norm());
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

double max_segment(const ClosedCharacteristic& o) {
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < o.points.size(); ++k) {
        worst = std::max(worst, (o.points[k + 1] - o.points[k]).norm());
    }
    return worst;
}

/// Max |dy/dt - J N(y)| with dy/dt from an eighth-order periodic stencil.
double sampled_residual(const ConvexBody& body,
                        const std::vector<double>& times,
                        const std::vector<Vec>& pts) {
    const std::size_t m = pts.size() - 1; // last point repeats the first
    if (m < 9) return 1e300;
    const double h = times[1] - times[0];
    static const double w[4] = {672.0, -168.0, 32.0, -3.0};
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        Vec d = Vec::Zero(pts[0].size());
        for (int s = 1; s <= 4; ++s) {
            const Vec& fp = pts[(i + s) % m];
            const Vec& fmn = pts[(i + m - s) % m];
            d += w[s - 1] * (fp - fmn);
        }
        d /= 840.0 * h;
        worst = std::max(worst,
                         (d - apply_J(body.gauge_grad(pts[i]))).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace

nlohmann::json ClosedCharacteristic::to_json() const {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < times.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        row.push_back(times[i]);
        for (int k = 0; k < points[i].size(); ++k) row.push_back(points[i](k));
        samples.push_back(row);
    }
    const char* src = source == Source::Analytic    ? "analytic"
                      : source == Source::Shooting ? "shooting"
                                                   : "dual-action";
    return nlohmann::json{{"tau", tau},
                          {"samples", samples},
                          {"source", src},
                          {"residual", residual},
                          {"multiplicity", multiplicity}};
}

ClosedCharacteristic ClosedCharacteristic::from_json(const nlohmann::json& j) {
    ClosedCharacteristic o;
    o.tau = j.at("tau").get<double>();
    o.residual = j.at("residual").get<double>();
    o.multiplicity = j.at("multiplicity").get<int>();
    const std::string src = j.at("source");
    o.source = src == "analytic"    ? Source::Analytic
               : src == "shooting" ? Source::Shooting
                                   : Source::DualAction;
    for (const auto& row : j.at("samples")) {
        o.times.push_back(row.at(0).get<double>());
        Vec p(row.size() - 1);
        for (std::size_t k = 1; k < row.size(); ++k) p(k - 1) = row.at(k);
        o.points.push_back(p);
    }
    return o;
}

void validate_orbit(const ConvexBody& body, const ClosedCharacteristic& orbit,
                    double close_tol) {
    if (orbit.times.size() != orbit.points.size() || orbit.points.size() < 2) {
        throw InvariantViolation("orbit: malformed sampling");
    }
    for (const Vec& p : orbit.points) {
        if (std::abs(body.gauge(p) - 1.0) > 1e-8) {
            throw InvariantViolation("orbit: sample leaves Sigma");
        }
    }
    const double scale = std::max(1.0, orbit.points.front().norm());
    if ((orbit.points.front() - orbit.points.back()).norm() > close_tol * scale) {
        throw InvariantViolation("orbit: trajectory does not close");
    }
    if (orbit.residual > 1e-7) {
        throw InvariantViolation("orbit: flow residual too large");
    }
}

// ---------------------------------------------------------------------------
// FourierLoop

FourierLoop::FourierLoop(int n, int n_modes) : n_(n), n_modes_(n_modes) {
    if (n_modes < 1) throw RangeError("FourierLoop: need at least one mode");
    coeffs_.assign(2 * n_modes, Vec::Zero(2 * n));
}

Vec& FourierLoop::coeff(int k) {
    if (k == 0 || std::abs(k) > n_modes_)
        throw RangeError("FourierLoop: mode index out of range");
    return coeffs_[k < 0 ? n_modes_ + k : n_modes_ - 1 + k];
}

const Vec& FourierLoop::coeff(int k) const {
    return const_cast<FourierLoop*>(this)->coeff(k);
}

Vec FourierLoop::value(double t) const {
    Vec u = Vec::Zero(2 * n_);
    for (int k = -n_modes_; k <= n_modes_; ++k) {
        if (k == 0) continue;
        const Vec& x = coeff(k);
        const double th = 2 * kPi * k * t;
        u += std::cos(th) * x + std::sin(th) * apply_J(x);
    }
    return u;
}

Vec FourierLoop::primitive(double t) const {
    Vec m = Vec::Zero(2 * n_);
    for (int k = -n_modes_; k <= n_modes_; ++k) {
        if (k == 0) continue;
        const Vec& x = coeff(k);
        const double th = 2 * kPi * k * t;
        Vec e = std::cos(th) * x + std::sin(th) * apply_J(x);
        m -= apply_J(e) / (2 * kPi * k);
    }
    return m;
}

double FourierLoop::norm2() const {
    double s = 0.0;
    for (const Vec& x : coeffs_) s += x.squaredNorm();
    return s;
}

// ---------------------------------------------------------------------------
// ellipsoid_orbits

std::vector<ClosedCharacteristic> ellipsoid_orbits(const ConvexBody& body,
                                                   int samples_per_orbit,
                                                   const Tolerances& tol) {
    if (!body.is_ellipsoid()) {
        throw RangeError("ellipsoid_orbits: body is not an ellipsoid");
    }
    const auto& r = body.semi_axes();
    const int n = body.n();
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            const double ratio = (r[j] * r[j]) / (r[k] * r[k]);
            if (rational_angle(ratio, tol.q_max, tol.angle_tol)) {
                throw RangeError(
                    "ellipsoid_orbits: squared-axis ratio is rational "
                    "(family degeneracy, a continuum of orbits exists)");
            }
        }
    }
    std::vector<ClosedCharacteristic> out;
    for (int j = 0; j < n; ++j) {
        ClosedCharacteristic o;
        o.tau = 2 * kPi * r[j] * r[j];
        o.source = ClosedCharacteristic::Source::Analytic;
        const double omega = 1.0 / (r[j] * r[j]);
        double worst = 0.0;
        for (int s = 0; s <= samples_per_orbit; ++s) {
            const double t = o.tau * s / samples_per_orbit;
            Vec y = Vec::Zero(2 * n);
            y(j) = r[j] * std::cos(omega * t);
            y(j + n) = r[j] * std::sin(omega * t);
            Vec dy = Vec::Zero(2 * n);
            dy(j) = -r[j] * omega * std::sin(omega * t);
            dy(j + n) = r[j] * omega * std::cos(omega * t);
            worst = std::max(
                worst, (dy - apply_J(body.gauge_grad(y))).cwiseAbs().maxCoeff());
            o.times.push_back(t);
            o.points.push_back(y);
        }
        o.residual = worst;
        validate_orbit(body, o);
        out.push_back(std::move(o));
    }
    return out;
}

// ---------------------------------------------------------------------------
// shoot

namespace {

std::optional<ClosedCharacteristic> polish_return(const ConvexBody& body,
                                                  Vec y0, double t_guess,
                                                  const Vec& seed,
                                                  const Vec& section_normal) {
    const int dim = static_cast<int>(y0.size());
    double t = t_guess;
    const double scale = std::max(1.0, seed.norm());
    for (int it = 0; it < 50; ++it) {
        Vec yt = advance(body, y0, t);
        Vec closure = yt - y0;
        const double on_sigma = body.gauge(y0) - 1.0;
        const double on_section = (y0 - seed).dot(section_normal);
        const double err = closure.norm() + std::abs(on_sigma) +
                           std::abs(on_section);
        if (err < 1e-11 * scale) {
            // Dense resampling of the closed trajectory.
            const int m = 1024;
            ClosedCharacteristic o;
            o.tau = t;
            o.source = ClosedCharacteristic::Source::Shooting;
            Vec y = y0;
            o.times.push_back(0.0);
            o.points.push_back(y);
            for (int s = 1; s <= m; ++s) {
                y = advance(body, y, t / m);
                o.times.push_back(t * s / m);
                o.points.push_back(y);
            }
            o.residual = sampled_residual(body, o.times, o.points);
            validate_orbit(body, o);
            return o;
        }
        // Least-squares Newton on [closure; gauge; section] over (y0, t).
        Mat mj = flow_jacobian(body, y0, t);
        Vec ft = apply_J(body.gauge_grad(advance(body, y0, t)));
        Mat a = Mat::Zero(dim + 2, dim + 1);
        Vec rhs = Vec::Zero(dim + 2);
        a.topLeftCorner(dim, dim) = mj - Mat::Identity(dim, dim);
        a.topRightCorner(dim, 1) = ft;
        a.block(dim, 0, 1, dim) = body.gauge_grad(y0).transpose();
        a.block(dim + 1, 0, 1, dim) = section_normal.transpose();
        rhs.head(dim) = -closure;
        rhs(dim) = -on_sigma;
        rhs(dim + 1) = -on_section;
        Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        Vec step = svd.solve(rhs);
        const double cap = 0.2 * scale;
        if (step.norm() > cap) step *= cap / step.norm();
        y0 += step.head(dim);
        t += step(dim);
        if (t <= 0) return std::nullopt;
    }
    return std::nullopt; // Newton stagnation: reported as absence
}

} // namespace

std::optional<ClosedCharacteristic> shoot(const ConvexBody& body,
                                          const Vec& seed_in, double t_max,
                                          const Tolerances& tol) {
    (void)tol;
    Vec seed = body.project(seed_in);
    if ((seed - seed_in).norm() > 1e-6 * std::max(1.0, seed_in.norm())) {
        throw RangeError("shoot: seed is not on Sigma");
    }
    const Vec f0 = apply_J(body.gauge_grad(seed));
    const Vec nu = f0 / f0.norm();

    const double dt_obs = t_max / 50000.0;
    std::vector<Vec> traj;
    std::vector<double> ts;
    {
        State s = to_state(seed);
        auto stepper = make_stepper();
        CharacteristicFlow flow{&body};
        try {
            boost::numeric::odeint::integrate_const(
                stepper, flow, s, 0.0, t_max, dt_obs,
                [&](const State& st, double t) {
                    traj.push_back(to_vec(st));
                    ts.push_back(t);
                });
        } catch (const std::exception& e) {
            throw IntegratorError(std::string("shoot: ") + e.what());
        }
    }
    for (std::size_t i = 10; i + 1 < traj.size(); ++i) {
        const double s_prev = (traj[i] - seed).dot(nu);
        const double s_next = (traj[i + 1] - seed).dot(nu);
        if (!(s_prev < 0.0 && s_next >= 0.0)) continue;
        // bisect the crossing time inside [ts[i], ts[i + 1]]
        double lo = 0.0, hi = ts[i + 1] - ts[i];
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double sm = (advance(body, traj[i], mid) - seed).dot(nu);
            (sm < 0 ? lo : hi) = mid;
        }
        const double t_cross = ts[i] + 0.5 * (lo + hi);
        Vec y_cross = advance(body, traj[i], 0.5 * (lo + hi));
        if ((y_cross - seed).norm() < 0.05 * std::max(1.0, seed.norm())) {
            auto orbit = polish_return(body, y_cross, t_cross, seed, nu);
            if (orbit) return orbit;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// dual_action

std::optional<DualActionResult> dual_action(const HamiltonianModel& hm,
                                            const FourierLoop& loop0,
                                            const Tolerances& tol) {
    (void)tol;
    if (hm.form != HamiltonianModel::Form::Scaled) {
        throw RangeError("dual_action: requires the scaled Hamiltonian model");
    }
    if (loop0.modes() < 8) {
        throw RangeError("dual_action: need at least 8 Fourier modes");
    }
    const int n = loop0.n();
    const int nm = loop0.modes();
    const int dim = 2 * n;
    const int nt = std::max(256, 8 * nm);
    FenchelDual g = fenchel(hm);

    // Flattened coefficient vector: mode slots [-N..-1, 1..N], each dim wide.
    auto pack = [&](const FourierLoop& l) {
        Vec z(2 * nm * dim);
        int slot = 0;
        for (int k = -nm; k <= nm; ++k) {
            if (k == 0) continue;
            z.segment(slot * dim, dim) = l.coeff(k);
            ++slot;
        }
        return z;
    };
    auto unpack = [&](const Vec& z) {
        FourierLoop l(n, nm);
        int slot = 0;
        for (int k = -nm; k <= nm; ++k) {
            if (k == 0) continue;
            l.coeff(k) = z.segment(slot * dim, dim);
            ++slot;
        }
        return l;
    };
    auto mode_of_slot = [&](int slot) { return slot < nm ? slot - nm : slot - nm + 1; };

    auto u_grid = [&](const FourierLoop& l) {
        std::vector<Vec> us(nt);
        for (int i = 0; i < nt; ++i) us[i] = l.value(static_cast<double>(i) / nt);
        return us;
    };

    auto psi = [&](const FourierLoop& l) {
        double quad = 0.0;
        for (int k = -nm; k <= nm; ++k) {
            if (k == 0) continue;
            quad -= l.coeff(k).squaredNorm() / (4 * kPi * k);
        }
        double integral = 0.0;
        for (const Vec& u : u_grid(l)) integral += g.value(Vec(-apply_J(u)));
        return quad + integral / nt;
    };

    auto gradient = [&](const FourierLoop& l) {
        std::vector<Vec> gs(nt);
        for (int i = 0; i < nt; ++i) {
            gs[i] = apply_J(g.grad(Vec(-apply_J(l.value(static_cast<double>(i) / nt)))));
        }
        Vec out(2 * nm * dim);
        int slot = 0;
        for (int k = -nm; k <= nm; ++k) {
            if (k == 0) continue;
            Vec acc = -l.coeff(k) / (2 * kPi * k);
            for (int i = 0; i < nt; ++i) {
                const double th = -2 * kPi * k * i / static_cast<double>(nt);
                acc += (std::cos(th) * gs[i] + std::sin(th) * apply_J(gs[i])) / nt;
            }
            out.segment(slot * dim, dim) = acc;
            ++slot;
        }
        return out;
    };

    Vec z = pack(loop0);
    double f = psi(unpack(z));
    Vec gr = gradient(unpack(z));
    // Convergence is judged relative to the loop amplitude: the rescaling
    // x = Mu + c, y = x / rho divides all absolute errors back out.
    auto gtol = [&] { return 1e-10 * std::max(1.0, z.norm()); };
    int newton_phase = 0;
    for (int it = 0; it < 2000; ++it) {
        if (gr.norm() <= gtol()) break;
        if (!std::isfinite(f) || z.norm() > 1e20) {
            throw NumericalError("dual_action: descent diverged");
        }
        Vec step;
        bool have_newton = false;
        if (newton_phase || gr.norm() < 1e-3 * std::max(1.0, z.norm())) {
            newton_phase = 1;
            // Assemble the Hessian: diagonal mode part plus the G'' coupling.
            FourierLoop l = unpack(z);
            const int big = 2 * nm * dim;
            Mat h = Mat::Zero(big, big);
            for (int slot = 0; slot < 2 * nm; ++slot) {
                const int k = mode_of_slot(slot);
                h.block(slot * dim, slot * dim, dim, dim) -=
                    Mat::Identity(dim, dim) / (2 * kPi * k);
            }
            Mat mJ = Mat::Zero(dim, dim);
            mJ.topRightCorner(n, n) = -Mat::Identity(n, n);
            mJ.bottomLeftCorner(n, n) = Mat::Identity(n, n);
            for (int i = 0; i < nt; ++i) {
                const double t = static_cast<double>(i) / nt;
                Mat gh = g.hess(Vec(-apply_J(l.value(t))));
                Mat core = mJ * gh * mJ.transpose(); // J G'' (-J)
                std::vector<Mat> rot(2 * nm);
                for (int slot = 0; slot < 2 * nm; ++slot) {
                    const int k = mode_of_slot(slot);
                    const double th = 2 * kPi * k * t;
                    rot[slot] = std::cos(th) * Mat::Identity(dim, dim) +
                                std::sin(th) * mJ;
                }
                for (int sa = 0; sa < 2 * nm; ++sa) {
                    Mat left = rot[sa].transpose() * core;
                    for (int sb = 0; sb < 2 * nm; ++sb) {
                        h.block(sa * dim, sb * dim, dim, dim) +=
                            (left * rot[sb]) / nt;
                    }
                }
            }
            Eigen::LDLT<Mat> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(-gr);
                have_newton = step.dot(-gr) > 0; // descent direction check
            }
            if (!have_newton) newton_phase = 0;
        }
        if (!have_newton) step = -gr;
        // Armijo backtracking
        double alpha = 1.0;
        const double slope = gr.dot(step);
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vec zt = z + alpha * step;
            double ft = psi(unpack(zt));
            // the 1e-13 |f| slack absorbs summation rounding at large |Psi|
            if (ft <= f + 1e-4 * alpha * slope + 1e-13 * std::abs(f)) {
                z = zt;
                f = ft;
                moved = true;
                break;
            }
            alpha /= 2.0;
        }
        if (!moved) {
            if (newton_phase) { newton_phase = 0; continue; }
            break;
        }
        gr = gradient(unpack(z));
    }
    if (gr.norm() > gtol()) {
        throw NumericalError("dual_action: did not reach gradient tolerance");
    }
    FourierLoop l = unpack(z);
    if (std::sqrt(l.norm2()) < 1e-8) return std::nullopt; // trivial solution

    // Reconstruction x = Mu + c with c the mean of G'(-Ju).
    Vec c = Vec::Zero(dim);
    for (int i = 0; i < nt; ++i) {
        c += g.grad(Vec(-apply_J(l.value(static_cast<double>(i) / nt)))) / nt;
    }
    std::vector<Vec> xs(nt + 1);
    for (int i = 0; i <= nt; ++i) {
        xs[i] = l.primitive(static_cast<double>(i % nt) / nt) + c;
    }
    double rho = 0.0, rho_lo = 1e300, rho_hi = 0.0;
    for (int i = 0; i < nt; ++i) {
        double jv = hm.body.gauge(xs[i]);
        rho += jv / nt;
        rho_lo = std::min(rho_lo, jv);
        rho_hi = std::max(rho_hi, jv);
    }
    if (rho_hi - rho_lo > 1e-6 * std::max(1.0, rho)) {
        throw NumericalError("dual_action: reconstructed level set drifts");
    }
    const double tau = hm.a * hm.phi.deriv(rho) / rho;

    DualActionResult res{l, {}, f};
    if (!(f < 0)) {
        throw InvariantViolation("dual_action: nonzero critical point with "
                                 "nonnegative action");
    }
    res.orbit.tau = tau;
    res.orbit.source = ClosedCharacteristic::Source::DualAction;
    double worst = 0.0;
    for (int i = 0; i <= nt; ++i) {
        const double t = static_cast<double>(i % nt) / nt;
        Vec y = xs[i] / rho;
        res.orbit.times.push_back(tau * i / nt);
        res.orbit.points.push_back(y);
        Vec dy = l.value(t) / (rho * tau);
        worst = std::max(
            worst,
            (dy - apply_J(hm.body.gauge_grad(y))).cwiseAbs().maxCoeff());
    }
    res.orbit.points.back() = res.orbit.points.front();
    res.orbit.residual = worst;
    validate_orbit(hm.body, res.orbit);
    return res;
}

// ---------------------------------------------------------------------------
// deduplicate

std::vector<ClosedCharacteristic> deduplicate(
    std::vector<ClosedCharacteristic> orbits) {
    const std::size_t m = orbits.size();
    std::vector<int> group(m, -1);
    int groups = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (group[i] >= 0) continue;
        group[i] = groups++;
        const double diam = std::max(orbit_diameter(orbits[i]), 1e-12);
        for (std::size_t k = i + 1; k < m; ++k) {
            if (group[k] >= 0) continue;
            // polyline chords cut corners by up to seg^2 / diam (curvature
            // sagitta), so the merge radius must absorb that discretization
            const double seg =
                std::max(max_segment(orbits[i]), max_segment(orbits[k]));
            const double radius = std::max(1e-6 * diam, seg * seg / diam);
            if (hausdorff(orbits[i], orbits[k]) <= radius) {
                group[k] = group[i];
            }
        }
    }
    auto source_rank = [](ClosedCharacteristic::Source s) {
        switch (s) {
            case ClosedCharacteristic::Source::Analytic: return 0;
            case ClosedCharacteristic::Source::Shooting: return 1;
            default: return 2;
        }
    };
    std::vector<ClosedCharacteristic> out;
    for (int gi = 0; gi < groups; ++gi) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < m; ++i)
            if (group[i] == gi) members.push_back(i);
        double tau_min = 1e300;
        for (std::size_t i : members) tau_min = std::min(tau_min, orbits[i].tau);
        // snap periods to integer multiples of the prime period
        std::vector<std::pair<int, std::size_t>> snapped;
        for (std::size_t i : members) {
            const double ratio = orbits[i].tau / tau_min;
            const double frac = ratio - std::floor(ratio);
            if (std::abs(frac - 0.5) < 1e-6) {
                throw ConsistencyError(
                    "deduplicate: period ratio sits at a half-integer", ratio,
                    std::round(2 * ratio) / 2.0);
            }
            const long mm = std::lround(ratio);
            if (std::abs(ratio - static_cast<double>(mm)) > 1e-6) {
                throw ConsistencyError(
                    "deduplicate: period ratio is not an integer multiple",
                    ratio, static_cast<double>(mm));
            }
            snapped.emplace_back(static_cast<int>(mm), i);
        }
        std::sort(snapped.begin(), snapped.end(),
                  [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first < b.first;
                      return source_rank(orbits[a.second].source) <
                             source_rank(orbits[b.second].source);
                  });
        int last_mult = 0;
        for (const auto& [mult, i] : snapped) {
            if (mult == last_mult) continue; // same iterate, keep best source
            last_mult = mult;
            ClosedCharacteristic o = orbits[i];
            o.multiplicity = mult;
            out.push_back(std::move(o));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ClosedCharacteristic& a, const ClosedCharacteristic& b) {
                  return a.tau < b.tau;
              });
    return out;
}

} // namespace cchar
