#include "cchar/path.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

namespace cchar {

namespace {

constexpr double kPi = std::numbers::pi;

Mat rot2(double theta) {
    Mat m(2, 2);
    m << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return m;
}

} // namespace

Mat factor_derivative(const PathFactor& f, double t, int side) {
    if (f.deriv) return f.deriv(t);
    const double h0 = std::max(1e-7 * f.tau, 1e-9);
    if (side == 0 && t - h0 >= 0.0 && t + h0 <= f.tau) {
        return (f.value(t + h0) - f.value(t - h0)) / (2.0 * h0);
    }
    // One-sided: second-order difference into the allowed direction.
    double s = (side > 0 || t - h0 < 0.0) ? 1.0 : -1.0;
    if (side < 0) s = -1.0;
    const Mat f0 = f.value(t);
    const Mat f1 = f.value(t + s * h0);
    const Mat f2 = f.value(t + 2.0 * s * h0);
    return s * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h0);
}

Mat factor_bfield(const PathFactor& f, double t, int side) {
    const Mat g = f.value(t);
    const Mat gd = factor_derivative(f, t, side);
    const Mat j = standard_J(f.n);
    Mat b = -j * gd * g.inverse();
    const double asym = (b - b.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (asym > 1e-4 * scale) {
        throw NumericalError("factor_bfield: coefficient matrix asymmetry " +
                             std::to_string(asym));
    }
    return 0.5 * (b + b.transpose());
}

SymplecticPath SymplecticPath::from_factor(PathFactor f) {
    SymplecticPath p;
    p.n_ = f.n;
    p.tau_ = f.tau;
    p.factors_.push_back(std::move(f));
    const Mat start = p.factors_[0].value(0.0);
    if ((start - Mat::Identity(2 * p.n_, 2 * p.n_)).cwiseAbs().maxCoeff() >
        1e-8) {
        throw InvariantViolation("SymplecticPath: gamma(0) is not the identity");
    }
    return p;
}

SymplecticPath SymplecticPath::from_evaluator(int n, double tau,
                                              std::function<Mat(double)> value,
                                              std::function<Mat(double)> deriv) {
    PathFactor f;
    f.n = n;
    f.tau = tau;
    f.value = std::move(value);
    f.deriv = std::move(deriv);
    return from_factor(std::move(f));
}

SymplecticPath SymplecticPath::from_samples(double tau, std::vector<Mat> samples) {
    if (samples.size() < 2) throw RangeError("from_samples: need >= 2 samples");
    const int dim = static_cast<int>(samples[0].rows());
    const int n = dim / 2;
    const int segs = static_cast<int>(samples.size()) - 1;
    auto logs = std::make_shared<std::vector<Mat>>();
    logs->reserve(segs);
    for (int k = 0; k < segs; ++k) {
        Mat rel = samples[k].inverse() * samples[k + 1];
        if ((rel - Mat::Identity(dim, dim)).norm() > 0.8) {
            throw NumericalError(
                "from_samples: consecutive samples too far apart for "
                "log interpolation");
        }
        logs->push_back(rel.log());
    }
    auto data = std::make_shared<std::vector<Mat>>(std::move(samples));
    const double dt = tau / segs;
    PathFactor f;
    f.n = n;
    f.tau = tau;
    f.value = [data, logs, dt, segs](double t) {
        int k = std::clamp(static_cast<int>(t / dt), 0, segs - 1);
        double s = (t - k * dt) / dt;
        Mat e = Mat((*logs)[k] * s).exp();
        return Mat((*data)[k] * e);
    };
    for (int k = 1; k < segs; ++k) f.breakpoints.push_back(k * dt);
    return from_factor(std::move(f));
}

Mat SymplecticPath::at(double t) const {
    Mat acc = factors_[0].value(t);
    for (std::size_t k = 1; k < factors_.size(); ++k) {
        acc = diamond(acc, factors_[k].value(t));
    }
    return acc;
}

SymplecticMatrix SymplecticPath::endpoint() const {
    return SymplecticMatrix(at(tau_), 1e-6);
}

std::vector<std::pair<double, Mat>> SymplecticPath::samples(int count) const {
    std::vector<std::pair<double, Mat>> out;
    out.reserve(count + 1);
    for (int k = 0; k <= count; ++k) {
        double t = tau_ * k / count;
        out.emplace_back(t, at(t));
    }
    return out;
}

SymplecticPath SymplecticPath::twist(double delta) const {
    SymplecticPath p;
    p.n_ = n_;
    p.tau_ = tau_;
    const double rate = delta / tau_;
    for (const auto& f : factors_) {
        PathFactor g;
        g.n = f.n;
        g.tau = f.tau;
        g.breakpoints = f.breakpoints;
        const Mat jf = standard_J(f.n);
        auto base = f; // copy keeps the original evaluators alive
        g.value = [base, jf, rate](double t) {
            Mat e = Mat(-rate * t * jf).exp();
            return Mat(base.value(t) * e);
        };
        if (f.deriv) {
            g.deriv = [base, jf, rate](double t) {
                Mat e = Mat(-rate * t * jf).exp();
                return Mat(base.deriv(t) * e +
                           base.value(t) * (-rate) * jf * e);
            };
        }
        p.factors_.push_back(std::move(g));
    }
    return p;
}

SymplecticPath diamond(const SymplecticPath& a, const SymplecticPath& b) {
    if (std::abs(a.tau_ - b.tau_) > 1e-12 * std::max(a.tau_, b.tau_)) {
        throw RangeError("diamond(paths): periods differ");
    }
    SymplecticPath p;
    p.n_ = a.n_ + b.n_;
    p.tau_ = a.tau_;
    p.factors_ = a.factors_;
    p.factors_.insert(p.factors_.end(), b.factors_.begin(), b.factors_.end());
    return p;
}

SymplecticPath iterate_path(const SymplecticPath& gamma, int m) {
    if (m < 1) throw RangeError("iterate_path: m must be positive");
    if (m == 1) return gamma;
    const double tau = gamma.tau();
    std::vector<PathFactor> out;
    for (const auto& f : gamma.factors()) {
        auto powers = std::make_shared<std::vector<Mat>>();
        powers->push_back(Mat::Identity(2 * f.n, 2 * f.n));
        const Mat end = f.value(f.tau);
        for (int j = 1; j < m; ++j) powers->push_back(Mat((*powers)[j - 1] * end));
        PathFactor g;
        g.n = f.n;
        g.tau = m * tau;
        auto base = f;
        g.value = [base, powers, tau, m](double t) {
            int j = std::clamp(static_cast<int>(t / tau), 0, m - 1);
            return Mat(base.value(t - j * tau) * (*powers)[j]);
        };
        if (f.deriv) {
            g.deriv = [base, powers, tau, m](double t) {
                int j = std::clamp(static_cast<int>(t / tau), 0, m - 1);
                return Mat(base.deriv(t - j * tau) * (*powers)[j]);
            };
        }
        for (int j = 1; j < m; ++j) g.breakpoints.push_back(j * tau);
        for (double bp : f.breakpoints)
            for (int j = 0; j < m; ++j) g.breakpoints.push_back(bp + j * tau);
        std::sort(g.breakpoints.begin(), g.breakpoints.end());
        out.push_back(std::move(g));
    }
    return [&] {
        SymplecticPath q = SymplecticPath::from_factor(std::move(out[0]));
        for (std::size_t k = 1; k < out.size(); ++k) {
            SymplecticPath r = SymplecticPath::from_factor(std::move(out[k]));
            q = diamond(q, r);
        }
        return q;
    }();
}

SymplecticPath generator_path(const BasicNormalForm& nf, double tau) {
    using Kind = BasicNormalForm::Kind;
    realize(nf); // validates parameters
    PathFactor f;
    f.n = nf.half_dim();
    f.tau = tau;
    switch (nf.kind) {
        case Kind::D: {
            const double lam = nf.lambda;
            if (lam > 0) {
                const double a = std::log(lam);
                f.value = [a, tau](double t) {
                    double s = t / tau;
                    Mat m(2, 2);
                    m << std::exp(a * s), 0, 0, std::exp(-a * s);
                    return m;
                };
                f.deriv = [a, tau](double t) {
                    double s = t / tau;
                    Mat m(2, 2);
                    m << a * std::exp(a * s), 0, 0, -a * std::exp(-a * s);
                    return Mat(m / tau);
                };
            } else {
                const double a = std::log(-lam);
                f.value = [a, tau](double t) {
                    double s = t / tau;
                    Mat d(2, 2);
                    d << std::exp(a * s), 0, 0, std::exp(-a * s);
                    return Mat(rot2(kPi * s) * d);
                };
            }
            break;
        }
        case Kind::N1: {
            const double lam = nf.lambda, b = nf.b;
            if (lam > 0) {
                f.value = [b, tau](double t) {
                    double s = t / tau;
                    Mat m(2, 2);
                    m << 1, s * b, 0, 1;
                    return m;
                };
                f.deriv = [b, tau](double t) {
                    (void)t;
                    Mat m(2, 2);
                    m << 0, b / tau, 0, 0;
                    return m;
                };
            } else {
                // R(pi s) * N1(1, -s b) ends at N1(-1, b).
                f.value = [b, tau](double t) {
                    double s = t / tau;
                    Mat u(2, 2);
                    u << 1, -s * b, 0, 1;
                    return Mat(rot2(kPi * s) * u);
                };
            }
            break;
        }
        case Kind::R: {
            const double th = nf.theta;
            f.value = [th, tau](double t) { return rot2(th * t / tau); };
            f.deriv = [th, tau](double t) {
                double a = th * t / tau;
                Mat m(2, 2);
                m << -std::sin(a), -std::cos(a), std::cos(a), -std::sin(a);
                return Mat(m * (th / tau));
            };
            break;
        }
        case Kind::N2: {
            const Mat end = realize(nf).entries();
            // Eigenvalues e^{+-i theta} stay off the negative axis, so the
            // principal log is real.
            auto lg = std::make_shared<Mat>(end.log());
            f.value = [lg, tau](double t) { return Mat(Mat(*lg * (t / tau)).exp()); };
            f.deriv = [lg, tau](double t) {
                Mat e = Mat(*lg * (t / tau)).exp();
                return Mat((*lg / tau) * e);
            };
            break;
        }
    }
    return SymplecticPath::from_factor(std::move(f));
}

SymplecticPath generator_path(const std::vector<BasicNormalForm>& nfs,
                              double tau) {
    if (nfs.empty()) throw RangeError("generator_path: empty list");
    SymplecticPath p = generator_path(nfs[0], tau);
    for (std::size_t k = 1; k < nfs.size(); ++k) {
        p = diamond(p, generator_path(nfs[k], tau));
    }
    return p;
}

PathFactor xi_path(int n) {
    PathFactor f;
    f.n = n;
    f.tau = 1.0;
    f.value = [n](double t) {
        Mat block(2, 2);
        block << 2.0 - t, 0, 0, 1.0 / (2.0 - t);
        Mat acc = block;
        for (int k = 1; k < n; ++k) acc = diamond(acc, block);
        return acc;
    };
    return f;
}

} // namespace cchar
