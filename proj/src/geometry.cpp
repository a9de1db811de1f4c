#include "cchar/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "cchar/errors.hpp"

namespace cchar {

namespace {

/// Deterministic direction sampling shared by all construction-time checks.
std::vector<Vec> sample_directions(int dim, int count) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec> dirs;
    dirs.reserve(count);
    for (int k = 0; k < count; ++k) {
        Vec d = Vec::NullaryExpr(dim, [&]() { return g(rng); });
        double nrm = d.norm();
        if (nrm < 1e-6) { --k; continue; }
        dirs.push_back(d / nrm);
    }
    return dirs;
}

} // namespace

ConvexBody ConvexBody::ellipsoid(std::vector<double> semi_axes) {
    if (semi_axes.empty()) throw RangeError("ellipsoid: no semi-axes");
    for (double r : semi_axes)
        if (!(r > 0)) throw RangeError("ellipsoid: semi-axes must be positive");
    ConvexBody b;
    b.n_ = static_cast<int>(semi_axes.size());
    b.semi_axes_ = std::move(semi_axes);
    b.validate();
    return b;
}

ConvexBody ConvexBody::generic(int n, std::function<double(const Vec&)> f,
                               std::function<Vec(const Vec&)> fgrad,
                               std::function<Mat(const Vec&)> fhess) {
    ConvexBody b;
    b.n_ = n;
    b.f_ = std::move(f);
    b.fgrad_ = std::move(fgrad);
    b.fhess_ = std::move(fhess);
    b.validate();
    return b;
}

double ConvexBody::gauge(const Vec& x) const {
    if (x.norm() == 0.0) return 0.0;
    if (is_ellipsoid()) {
        double q = 0.0;
        for (int k = 0; k < n_; ++k) {
            const double inv = 1.0 / (semi_axes_[k] * semi_axes_[k]);
            q += (x(k) * x(k) + x(k + n_) * x(k + n_)) * inv;
        }
        return std::sqrt(q);
    }
    // Solve F(x/s) = 1 for s > 0; F(x/s) decreases in s for star-shaped F.
    double s = x.norm();
    double lo = s, hi = s;
    while (f_(x / lo) < 1.0) { lo /= 2.0; if (lo < 1e-300) throw NumericalError("gauge: bracketing failed"); }
    while (f_(x / hi) > 1.0) { hi *= 2.0; if (hi > 1e300) throw NumericalError("gauge: bracketing failed"); }
    s = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        Vec u = x / s;
        double g = f_(x / s) - 1.0;
        if (std::abs(g) < 1e-14) break;
        double dg = -fgrad_(u).dot(x) / (s * s);
        double ns = s - g / dg;
        if (!(ns > lo && ns < hi)) ns = 0.5 * (lo + hi);
        (f_(x / ns) > 1.0 ? lo : hi) = ns;
        s = ns;
    }
    return s;
}

Vec ConvexBody::gauge_grad(const Vec& x) const {
    if (x.norm() == 0.0) throw RangeError("gauge_grad: singular point x = 0");
    if (is_ellipsoid()) {
        Vec ax(2 * n_);
        for (int k = 0; k < n_; ++k) {
            const double inv = 1.0 / (semi_axes_[k] * semi_axes_[k]);
            ax(k) = x(k) * inv;
            ax(k + n_) = x(k + n_) * inv;
        }
        return ax / gauge(x);
    }
    const double j = gauge(x);
    Vec u = x / j;
    Vec w = fgrad_(u);
    return w / w.dot(u);
}

Mat ConvexBody::gauge_hess(const Vec& x) const {
    if (x.norm() == 0.0) throw RangeError("gauge_hess: singular point x = 0");
    const double j = gauge(x);
    if (is_ellipsoid()) {
        Mat a = Mat::Zero(2 * n_, 2 * n_);
        for (int k = 0; k < n_; ++k) {
            const double inv = 1.0 / (semi_axes_[k] * semi_axes_[k]);
            a(k, k) = inv;
            a(k + n_, k + n_) = inv;
        }
        Vec ax = a * x;
        return a / j - ax * ax.transpose() / (j * j * j);
    }
    Vec u = x / j;
    Vec w = fgrad_(u);
    const double s = w.dot(u);
    Mat h = fhess_(u);
    Mat p = Mat::Identity(2 * n_, 2 * n_) - u * w.transpose() / s;
    return (p.transpose() * h * p) / (s * j);
}

Vec ConvexBody::project(const Vec& x) const {
    const double j = gauge(x);
    if (j <= 0) throw RangeError("project: cannot project the origin");
    return x / j;
}

void ConvexBody::validate() const {
    const int dim = 2 * n_;
    auto dirs = sample_directions(dim, 200);
    const double radii[3] = {0.5, 1.0, 2.0};
    for (const Vec& d : dirs) {
        for (double rad : radii) {
            Vec x = rad * d;
            const double j = gauge(x);
            if (!(j > 0)) throw InvariantViolation("gauge not positive");
            // degree-1 homogeneity
            const double jl = gauge(Vec(1.7 * x));
            if (std::abs(jl - 1.7 * j) > 1e-9 * std::abs(jl)) {
                throw InvariantViolation("gauge homogeneity violated");
            }
            // Euler identity j'(x) . x = j(x)
            Vec g = gauge_grad(x);
            if (std::abs(g.dot(x) - j) > 1e-9 * std::max(1.0, j)) {
                throw InvariantViolation("gauge Euler identity violated");
            }
        }
        // Strict convexity: on Sigma, j'' kills the radial direction and is
        // positive definite transversally.
        Vec y = project(d);
        Mat h = gauge_hess(y);
        if ((h * y).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
            throw InvariantViolation("gauge Hessian does not kill the radial direction");
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        if (es.eigenvalues()(0) < -1e-9 || es.eigenvalues()(1) <= 1e-12) {
            throw InvariantViolation("gauge Hessian not positive on the tangent space");
        }
    }
}

ConvexBody body_from_polynomial(
    int n, const std::vector<std::pair<double, std::vector<int>>>& terms) {
    const int dim = 2 * n;
    for (const auto& [coef, powers] : terms) {
        (void)coef;
        if (static_cast<int>(powers.size()) != dim)
            throw RangeError("body: term exponent list has wrong length");
        int deg = 0;
        for (int e : powers) {
            if (e < 0) throw RangeError("body: negative exponent");
            deg += e;
        }
        if (deg > 4) throw RangeError("body: polynomial degree exceeds 4");
    }
    auto tcopy = terms;
    auto value = [tcopy](const Vec& x) {
        double acc = 0.0;
        for (const auto& [coef, powers] : tcopy) {
            double m = coef;
            for (int i = 0; i < x.size(); ++i)
                for (int e = 0; e < powers[i]; ++e) m *= x(i);
            acc += m;
        }
        return acc;
    };
    auto grad = [tcopy, dim](const Vec& x) {
        Vec g = Vec::Zero(dim);
        for (const auto& [coef, powers] : tcopy) {
            for (int i = 0; i < dim; ++i) {
                if (powers[i] == 0) continue;
                double m = coef * powers[i];
                for (int k = 0; k < dim; ++k) {
                    int e = powers[k] - (k == i ? 1 : 0);
                    for (int q = 0; q < e; ++q) m *= x(k);
                }
                g(i) += m;
            }
        }
        return g;
    };
    auto hess = [tcopy, dim](const Vec& x) {
        Mat h = Mat::Zero(dim, dim);
        for (const auto& [coef, powers] : tcopy) {
            for (int i = 0; i < dim; ++i) {
                for (int l = 0; l < dim; ++l) {
                    int ei = powers[i] - (l == i ? 1 : 0);
                    if (powers[l] == 0 || ei <= 0) continue;
                    double m = coef * powers[l] * ei;
                    for (int k = 0; k < dim; ++k) {
                        int e = powers[k] - (k == i ? 1 : 0) - (k == l ? 1 : 0);
                        for (int q = 0; q < e; ++q) m *= x(k);
                    }
                    h(i, l) += m;
                }
            }
        }
        return h;
    };
    ConvexBody b = ConvexBody::generic(n, value, grad, hess);
    b.terms_ = terms;
    return b;
}

nlohmann::json ConvexBody::to_json() const {
    if (is_ellipsoid()) {
        return nlohmann::json{{"type", "ellipsoid"}, {"r", semi_axes_}};
    }
    if (terms_.empty()) {
        throw RangeError("ConvexBody::to_json: generic body lacks polynomial data");
    }
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& [coef, powers] : terms_) {
        coeffs.push_back({{"c", coef}, {"p", powers}});
    }
    return nlohmann::json{{"type", "generic"}, {"n", n_}, {"coeffs", coeffs}};
}

ConvexBody ConvexBody::from_json(const nlohmann::json& spec) {
    const std::string type = spec.at("type");
    if (type == "ellipsoid") {
        return ellipsoid(spec.at("r").get<std::vector<double>>());
    }
    if (type == "generic") {
        std::vector<std::pair<double, std::vector<int>>> terms;
        for (const auto& t : spec.at("coeffs")) {
            terms.emplace_back(t.at("c").get<double>(),
                               t.at("p").get<std::vector<int>>());
        }
        return body_from_polynomial(spec.at("n").get<int>(), terms);
    }
    throw RangeError("ConvexBody::from_json: unknown type " + type);
}

// ---------------------------------------------------------------------------
// PhiFunction

double PhiFunction::head(double t, int d) const {
    const double k = 1.0 / c; // alpha^2 - 7 alpha + 12
    const double a2 = 0.5 * k;
    const double a3 = -alpha * alpha + 6 * alpha - 8;
    const double a4 = 0.5 * (alpha * alpha - 5 * alpha + 6);
    double v = 0.0;
    switch (d) {
        case 0: v = a2 * t * t + a3 * t * t * t + a4 * t * t * t * t; break;
        case 1: v = 2 * a2 * t + 3 * a3 * t * t + 4 * a4 * t * t * t; break;
        case 2: v = 2 * a2 + 6 * a3 * t + 12 * a4 * t * t; break;
        default: throw RangeError("phi: derivative order");
    }
    return c * v;
}

double PhiFunction::core(double t, int d) const {
    switch (d) {
        case 0: return c * std::pow(t, alpha);
        case 1: return c * alpha * std::pow(t, alpha - 1);
        case 2: return c * alpha * (alpha - 1) * std::pow(t, alpha - 2);
        default: throw RangeError("phi: derivative order");
    }
}

double PhiFunction::tail(double t, int d) const {
    const double v0 = core(T, 0), v1 = core(T, 1), v2 = core(T, 2);
    const double dt = t - T;
    switch (d) {
        case 0: return v0 + v1 * dt + 0.5 * v2 * dt * dt;
        case 1: return v1 + v2 * dt;
        case 2: return v2;
        default: throw RangeError("phi: derivative order");
    }
}

double PhiFunction::raw(double t, int d) const {
    if (t <= 1.0) return head(t, d);
    if (t <= T) return core(t, d);
    return tail(t, d);
}

double PhiFunction::eval(double t, int d) const {
    for (double splice : {1.0, T}) {
        const double rho = blend_radius_;
        if (std::abs(t - splice) >= rho) continue;
        // Quintic matching value and two derivatives of the raw profile at
        // both blend edges.
        const double a = splice - rho, b = splice + rho;
        Eigen::Matrix<double, 6, 6> m;
        Eigen::Matrix<double, 6, 1> rhs;
        auto fill = [&](int row, double s, int der, double val) {
            for (int p = 0; p < 6; ++p) {
                double cpow = 1.0;
                for (int q = 0; q < p - der; ++q) cpow *= (s - splice);
                double fac = 1.0;
                for (int q = 0; q < der; ++q) fac *= (p - q);
                m(row, p) = (p >= der) ? fac * cpow : 0.0;
            }
            rhs(row) = val;
        };
        fill(0, a, 0, raw(a, 0));
        fill(1, a, 1, raw(a, 1));
        fill(2, a, 2, raw(a, 2));
        fill(3, b, 0, raw(b, 0));
        fill(4, b, 1, raw(b, 1));
        fill(5, b, 2, raw(b, 2));
        Eigen::Matrix<double, 6, 1> coef = m.fullPivLu().solve(rhs);
        double v = 0.0;
        for (int p = d; p < 6; ++p) {
            double fac = 1.0;
            for (int q = 0; q < d; ++q) fac *= (p - q);
            double cpow = 1.0;
            for (int q = 0; q < p - d; ++q) cpow *= (t - splice);
            v += coef(p) * fac * cpow;
        }
        return v;
    }
    return raw(t, d);
}

double PhiFunction::value(double t) const { return eval(t, 0); }
double PhiFunction::deriv(double t) const { return eval(t, 1); }
double PhiFunction::deriv2(double t) const { return eval(t, 2); }

double PhiFunction::invert_deriv(double target) const {
    if (!(target > 0)) throw RangeError("invert_deriv: target must be positive");
    double lo = 0.0, hi = 1.0;
    while (deriv(hi) < target) {
        hi *= 2.0;
        if (!(hi < 1e300) || !std::isfinite(deriv(hi)))
            throw NumericalError("invert_deriv: target above range");
    }
    // Bisection to a tight bracket, then Newton polish.
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        (deriv(mid) < target ? lo : hi) = mid;
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
        double g = deriv(t) - target;
        double dg = deriv2(t);
        if (dg <= 0) break;
        double nt = t - g / dg;
        if (nt > lo && nt < hi) t = nt;
    }
    if (std::abs(deriv(t) - target) > 1e-12 * std::max(1.0, target)) {
        throw NumericalError("invert_deriv: did not reach tolerance");
    }
    return t;
}

PhiFunction build_phi(double vartheta, double alpha, bool homogeneous_core) {
    if (!(vartheta > 0 && vartheta < 1))
        throw RangeError("build_phi: vartheta must lie in (0,1)");
    if (!(alpha > 1 && alpha < 2))
        throw RangeError("build_phi: alpha must lie in (1,2)");
    PhiFunction phi;
    phi.vartheta = vartheta;
    phi.alpha = alpha;
    phi.homogeneous_core = homogeneous_core;
    const double k = alpha * alpha - 7 * alpha + 12;
    phi.c = 1.0 / k;
    if (homogeneous_core && alpha / k <= 1.0 - vartheta) {
        throw RangeError(
            "build_phi: infeasible parameters, the exact-power window needs "
            "phi'(t)/t > 1 - vartheta on [0,1]; raise alpha toward 2");
    }
    // Start the quadratic tail once phi'(t)/t = c alpha t^{alpha-2} has
    // dropped below vartheta/(2 alpha - 1).
    const double bound =
        std::pow(phi.c * alpha * (2 * alpha - 1) / vartheta, 1.0 / (2.0 - alpha));
    phi.T = std::max(1.1 * bound, 1.5);

    // Construction-time certification on a sampled grid. T grows like
    // theta^{-1/(2-alpha)} and can be enormous for alpha near 2, so cover
    // [3, 2T] geometrically and (0, 3] linearly.
    std::vector<double> ts;
    for (int s = 1; s <= 1500; ++s) ts.push_back(3.0 * s / 1500);
    if (2.0 * phi.T > 3.0) {
        const double span = std::log(2.0 * phi.T / 3.0);
        for (int s = 1; s <= 1000; ++s)
            ts.push_back(3.0 * std::exp(span * s / 1000));
    }
    double sigma = 1e300;
    double prev_ratio = 1e300;
    for (double t : ts) {
        double ratio = phi.deriv(t) / t;
        double curv = phi.deriv2(t);
        if (ratio >= prev_ratio + 1e-12) {
            throw InvariantViolation("build_phi: phi'(t)/t is not decreasing");
        }
        prev_ratio = ratio;
        sigma = std::min({sigma, ratio, curv});
    }
    if (!(sigma > 0)) throw InvariantViolation("build_phi: lost strict convexity");
    phi.sigma = sigma;
    if (std::abs(phi.deriv2(0.0) - 1.0) > 1e-12) {
        throw InvariantViolation("build_phi: phi''(0) != 1");
    }
    return phi;
}

// ---------------------------------------------------------------------------
// HamiltonianModel

namespace {

void sample_hessian_bounds(HamiltonianModel& hm) {
    const int dim = 2 * hm.body.n();
    auto dirs = sample_directions(dim, 200);
    double lo = 1e300, hi = 0.0;
    const double radii[3] = {0.5, 1.0, 2.0};
    for (const Vec& d : dirs) {
        for (double rad : radii) {
            Mat h = hamiltonian_eval(hm, Vec(rad * d)).hessian;
            Eigen::SelfAdjointEigenSolver<Mat> es(h);
            lo = std::min(lo, es.eigenvalues()(0));
            hi = std::max(hi, es.eigenvalues()(dim - 1));
        }
    }
    if (!(lo > 0)) {
        throw InvariantViolation("Hamiltonian not strictly convex on samples");
    }
    hm.r = lo;
    hm.R = hi;
}

} // namespace

HamiltonianModel HamiltonianModel::scaled(ConvexBody body, double a,
                                          PhiFunction phi) {
    if (!(a > 0)) throw RangeError("HamiltonianModel: a must be positive");
    HamiltonianModel hm;
    hm.body = std::move(body);
    hm.form = Form::Scaled;
    hm.a = a;
    hm.phi = phi;
    sample_hessian_bounds(hm);
    return hm;
}

HamiltonianModel HamiltonianModel::homogeneous(ConvexBody body, double alpha) {
    if (!(alpha > 1 && alpha < 2))
        throw RangeError("HamiltonianModel: alpha must lie in (1,2)");
    HamiltonianModel hm;
    hm.body = std::move(body);
    hm.form = Form::PureHomogeneous;
    hm.alpha = alpha;
    // The pure power is not uniformly convex over shells (the Hessian decays
    // like j^{alpha-2} only radially); sample on the unit shell alone.
    const int dim = 2 * hm.body.n();
    auto dirs = sample_directions(dim, 200);
    double lo = 1e300, hi = 0.0;
    for (const Vec& d : dirs) {
        Mat h = hamiltonian_eval(hm, hm.body.project(d)).hessian;
        Eigen::SelfAdjointEigenSolver<Mat> es(h);
        lo = std::min(lo, es.eigenvalues()(0));
        hi = std::max(hi, es.eigenvalues()(dim - 1));
    }
    if (!(lo > 0)) {
        throw InvariantViolation("Hamiltonian not strictly convex on samples");
    }
    hm.r = lo;
    hm.R = hi;
    return hm;
}

HamiltonianEval hamiltonian_eval(const HamiltonianModel& hm, const Vec& x,
                                 bool with_hessian) {
    HamiltonianEval out;
    const int dim = static_cast<int>(x.size());
    if (x.norm() == 0.0) {
        if (with_hessian) {
            throw RangeError("hamiltonian_eval: Hessian is singular at x = 0");
        }
        out.value = 0.0;
        out.gradient = Vec::Zero(dim);
        return out;
    }
    const double lam = hm.body.gauge(x);
    const Vec jp = hm.body.gauge_grad(x);
    if (hm.form == HamiltonianModel::Form::Scaled) {
        out.value = hm.a * hm.phi.value(lam);
        out.gradient = hm.a * hm.phi.deriv(lam) * jp;
        if (with_hessian) {
            const Mat jpp = hm.body.gauge_hess(x);
            out.hessian = hm.a * hm.phi.deriv2(lam) * (jp * jp.transpose()) +
                          hm.a * hm.phi.deriv(lam) * jpp;
        }
    } else {
        const double al = hm.alpha;
        out.value = std::pow(lam, al);
        out.gradient = al * std::pow(lam, al - 1) * jp;
        if (with_hessian) {
            const Mat jpp = hm.body.gauge_hess(x);
            out.hessian = al * (al - 1) * std::pow(lam, al - 2) *
                              (jp * jp.transpose()) +
                          al * std::pow(lam, al - 1) * jpp;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// FenchelDual

namespace {

/// Supporting decomposition y = mu j'(xi) with xi on Sigma, mu > 0.
std::pair<double, Vec> support_point(const ConvexBody& body, const Vec& y) {
    if (y.norm() == 0.0) throw RangeError("fenchel: y = 0 has no support point");
    if (body.is_ellipsoid()) {
        const int n = body.n();
        Vec ay(2 * n);
        for (int k = 0; k < n; ++k) {
            const double r2 = body.semi_axes()[k] * body.semi_axes()[k];
            ay(k) = y(k) * r2;
            ay(k + n) = y(k + n) * r2;
        }
        const double mu = std::sqrt(y.dot(ay));
        return {mu, Vec(ay / mu)};
    }
    // Bordered Newton on [y - mu j'(xi); j(xi) - 1].
    const int dim = static_cast<int>(y.size());
    Vec xi = body.project(y);
    double mu = y.dot(xi);
    for (int it = 0; it < 50; ++it) {
        Vec g = body.gauge_grad(xi);
        Vec r1 = y - mu * g;
        double r2 = body.gauge(xi) - 1.0;
        if (r1.norm() + std::abs(r2) < 1e-12 * std::max(1.0, y.norm())) {
            return {mu, xi};
        }
        Mat kkt = Mat::Zero(dim + 1, dim + 1);
        kkt.topLeftCorner(dim, dim) = mu * body.gauge_hess(xi);
        kkt.topRightCorner(dim, 1) = g;
        kkt.bottomLeftCorner(1, dim) = g.transpose();
        Vec rhs(dim + 1);
        rhs.head(dim) = r1;
        rhs(dim) = -r2;
        Vec step = kkt.fullPivLu().solve(rhs);
        xi += step.head(dim);
        mu += step(dim);
    }
    throw NumericalError(
        "fenchel: support decomposition did not converge (dual-domain)");
}

} // namespace

FenchelDual fenchel(const HamiltonianModel& hm) {
    FenchelDual g;
    g.hm_ = std::make_shared<HamiltonianModel>(hm);
    if (hm.form == HamiltonianModel::Form::PureHomogeneous) {
        const double al = hm.alpha;
        g.beta_ = al / (al - 1.0);
        g.c1_ = std::pow(al, -1.0 / (al - 1.0)) - std::pow(al, -al / (al - 1.0));
    } else if (hm.phi.homogeneous_core) {
        const double al = hm.phi.alpha;
        g.beta_ = al / (al - 1.0);
        const double ca = hm.a * hm.phi.c;
        // sup over rho of rho mu - ca rho^alpha, attained in the core window.
        g.c1_ = (1.0 - 1.0 / al) * std::pow(ca * al, -1.0 / (al - 1.0));
    }
    return g;
}

Vec FenchelDual::primal_point(const Vec& y) const {
    auto [mu, xi] = support_point(hm_->body, y);
    double rho;
    if (hm_->form == HamiltonianModel::Form::Scaled) {
        rho = hm_->phi.invert_deriv(mu / hm_->a);
    } else {
        rho = std::pow(mu / hm_->alpha, 1.0 / (hm_->alpha - 1.0));
    }
    return rho * xi;
}

double FenchelDual::value(const Vec& y) const {
    if (y.norm() == 0.0) return 0.0;
    Vec x = primal_point(y);
    return x.dot(y) - hamiltonian_eval(*hm_, x, false).value;
}

Vec FenchelDual::grad(const Vec& y) const {
    if (y.norm() == 0.0) return Vec::Zero(y.size());
    return primal_point(y);
}

Mat FenchelDual::hess(const Vec& y) const {
    if (y.norm() == 0.0) throw RangeError("FenchelDual::hess: singular at y = 0");
    Vec x = primal_point(y);
    Mat h = hamiltonian_eval(*hm_, x).hessian;
    return h.inverse();
}

} // namespace cchar
