#include "cchar/index.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <utility>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace cchar {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_one(Complex omega) { return std::abs(omega - Complex(1, 0)) < 1e-12; }

double sigma_min(const Mat& g, Complex omega) {
    const int dim = static_cast<int>(g.rows());
    CMat a = g.cast<Complex>() - omega * CMat::Identity(dim, dim);
    Eigen::JacobiSVD<CMat> svd(a);
    return svd.singularValues()(dim - 1);
}

struct KernelData {
    CMat basis;       // columns: near-kernel right singular vectors
    double sigma_max; // scale of g - omega I
};

KernelData kernel_basis(const Mat& g, Complex omega, double rank_rel) {
    const int dim = static_cast<int>(g.rows());
    CMat a = g.cast<Complex>() - omega * CMat::Identity(dim, dim);
    Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double thresh = rank_rel * std::max(sv(0), 1.0);
    int k = 0;
    for (int i = 0; i < dim; ++i)
        if (sv(i) <= thresh) ++k;
    if (k == 0) k = 1; // the caller certified a crossing; keep the closest direction
    KernelData kd;
    kd.basis = svd.matrixV().rightCols(k);
    kd.sigma_max = sv(0);
    return kd;
}

/// Basis of the order-`alg` generalized kernel of g - omega I. At a defective
/// (Jordan) eigenvalue the geometric kernel is Krein-isotropic and crossing
/// forms vanish on it; the generalized kernel carries the true signature.
CMat generalized_kernel(const Mat& g, Complex omega, int alg) {
    const int dim = static_cast<int>(g.rows());
    CMat m = g.cast<Complex>() - omega * CMat::Identity(dim, dim);
    CMat p = CMat::Identity(dim, dim);
    for (int i = 0; i < alg; ++i) p = m * p;
    Eigen::JacobiSVD<CMat> svd(p, Eigen::ComputeFullV);
    return svd.matrixV().rightCols(alg);
}

/// Algebraic multiplicity of omega in the spectrum of g, up to a loose tube.
int algebraic_mult(const Mat& g, Complex omega) {
    Eigen::ComplexEigenSolver<CMat> es(g.cast<Complex>(), false);
    int a = 0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        if (std::abs(es.eigenvalues()(k) - omega) < 1e-5) ++a;
    }
    return a;
}

/// Signature of the Hermitian form v -> v^H B v restricted to the span of V.
int form_signature(const CMat& v, const Mat& b, bool* degenerate) {
    CMat gamma = v.adjoint() * b.cast<Complex>() * v;
    gamma = Complex(0.5, 0.0) * (gamma + gamma.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<CMat> es(gamma);
    const Vec ev = es.eigenvalues();
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    int sig = 0;
    *degenerate = false;
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i)) <= 1e-6 * scale) {
            *degenerate = true;
        } else {
            sig += ev(i) > 0 ? 1 : -1;
        }
    }
    return sig;
}

PathFactor twist_factor(const PathFactor& f, double delta) {
    PathFactor g;
    g.n = f.n;
    g.tau = f.tau;
    g.breakpoints = f.breakpoints;
    const Mat jf = standard_J(f.n);
    const double rate = delta / f.tau;
    auto base = f;
    g.value = [base, jf, rate](double t) {
        Mat e = Mat(-rate * t * jf).exp();
        return Mat(base.value(t) * e);
    };
    if (f.deriv) {
        g.deriv = [base, jf, rate](double t) {
            Mat e = Mat(-rate * t * jf).exp();
            return Mat(base.deriv(t) * e + base.value(t) * (-rate) * jf * e);
        };
    }
    return g;
}

double golden_min(const std::function<double(double)>& fn, double a, double b,
                  int iters) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int it = 0; it < iters && (b - a) > 1e-15 * std::max(1.0, std::abs(b));
         ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a);
            f2 = fn(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

/// Twice the omega-index contribution of one diamond factor.
long factor_index2(const PathFactor& f, Complex omega, const Tolerances& tol,
                   int depth) {
    const Mat endpoint = f.value(f.tau);
    const int nu_end = nu_omega(endpoint, omega, tol);

    auto twisted = [&](double delta) {
        return factor_index2(twist_factor(f, delta), omega, tol, depth + 1);
    };
    auto fallback = [&]() -> long {
        if (depth >= 1) {
            throw StabilityError(
                "omega_index: crossing form still degenerate after twisting");
        }
        // Lower-semicontinuous convention: a small clockwise twist realizes
        // the infimum over nearby nondegenerate paths.
        long a = twisted(tol.perturb_delta);
        long b = twisted(tol.perturb_delta / 2.0);
        if (a != b) {
            throw StabilityError("omega_index: twist regularization unstable");
        }
        return a;
    };

    // Grid sized from the speed of the linear system the factor solves.
    double max_b = 0.0;
    for (int k = 0; k <= 16; ++k) {
        double t = f.tau * (k + 0.5) / 17.0;
        try {
            max_b = std::max(max_b, factor_bfield(f, t).cwiseAbs().maxCoeff() *
                                        2 * f.n);
        } catch (const NumericalError&) {
            // breakpoint hit; neighbors dominate anyway
        }
    }
    int grid_n = std::max(600, static_cast<int>(std::ceil(8.0 * f.tau * max_b)));
    grid_n = std::min(grid_n, 200000);
    std::vector<double> ts;
    ts.reserve(grid_n + 1 + f.breakpoints.size());
    for (int k = 0; k <= grid_n; ++k) ts.push_back(f.tau * k / grid_n);
    for (double bp : f.breakpoints)
        if (bp > 0 && bp < f.tau) ts.push_back(bp);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [&](double a, double b) {
                             return std::abs(a - b) < 1e-13 * f.tau;
                         }),
             ts.end());

    const bool planar = endpoint.rows() == 2;
    std::vector<double> s(ts.size());
    std::vector<double> tr(planar ? ts.size() : 0);
    int tiny = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const Mat g = f.value(ts[k]);
        s[k] = sigma_min(g, omega);
        if (planar) tr[k] = g.trace();
        if (s[k] < 1e-7) ++tiny;
    }
    if (tiny > static_cast<int>(ts.size()) / 4) {
        return fallback(); // the path runs inside the degenerate variety
    }

    long mu2 = 0;

    std::size_t start_idx = 0;
    if (is_one(omega)) {
        // Every path starts at the fully 1-degenerate identity; the initial
        // crossing contributes half the signature of B(0+).
        Mat b0 = factor_bfield(f, 0.0, +1);
        Eigen::SelfAdjointEigenSolver<Mat> es(b0);
        bool degen = false;
        int sig = 0;
        const double scale = std::max(1.0, b0.cwiseAbs().maxCoeff());
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            double ev = es.eigenvalues()(i);
            if (std::abs(ev) <= 1e-6 * scale)
                degen = true;
            else
                sig += ev > 0 ? 1 : -1;
        }
        if (degen) return fallback();
        mu2 += sig; // 2 * (sig / 2)
        while (start_idx < ts.size() && s[start_idx] <= 1e-6) ++start_idx;
        if (start_idx == ts.size()) return fallback();
    }

    // Candidate crossings: local minima of sigma_min plus the two boundary
    // cells, which hold no interior sample when the dip hugs an endpoint.
    const double cand_thresh = 0.25;
    struct Candidate { double lo, hi; };
    std::vector<Candidate> cands;
    for (std::size_t k = std::max<std::size_t>(start_idx, 1);
         k + 1 < ts.size(); ++k) {
        if (s[k] <= s[k - 1] && s[k] <= s[k + 1] && s[k] < cand_thresh) {
            cands.push_back({ts[k - 1], ts[k + 1]});
        }
    }
    if (!is_one(omega) && s[0] < cand_thresh && s[0] <= s[1]) {
        cands.push_back({0.0, ts[1]});
    }
    if (s.back() < cand_thresh && s.back() < s[s.size() - 2]) {
        cands.push_back({ts[ts.size() - 2], f.tau});
    }
    // A zero can dip and recover strictly inside one cell, registering no
    // local minimum at either sample; flag cells whose boundary values are
    // small against the neighboring per-cell variation.
    const double t_floor = start_idx > 0 ? ts[start_idx] : 0.0;
    for (std::size_t k = std::max<std::size_t>(start_idx + 1, 1);
         k + 2 < ts.size(); ++k) {
        if (std::max(s[k], s[k + 1]) >= cand_thresh) continue;
        const double drop =
            std::max(std::abs(s[k] - s[k - 1]), std::abs(s[k + 2] - s[k + 1]));
        if (std::min(s[k], s[k + 1]) < drop) {
            cands.push_back({ts[k - 1], ts[k + 2]});
        }
    }
    // A strongly hyperbolic planar factor sweeps its whole elliptic window
    // inside one grid cell, so no sigma sample sees the dip. The trace still
    // crosses 2 Re(omega) there with a sign change; bisect it.
    if (planar) {
        const double c = 2.0 * omega.real();
        auto trace_at = [&](double t) { return f.value(t).trace(); };
        for (std::size_t k = start_idx; k + 1 < ts.size(); ++k) {
            const double a0 = tr[k] - c, a1 = tr[k + 1] - c;
            if (a0 == 0.0 || a0 * a1 >= 0.0) continue;
            double lo = ts[k], hi = ts[k + 1];
            for (int it = 0; it < 60 && hi - lo > 1e-14 * f.tau; ++it) {
                const double mid = 0.5 * (lo + hi);
                ((trace_at(mid) - c) * a0 > 0.0 ? lo : hi) = mid;
            }
            const double t0 = 0.5 * (lo + hi);
            const double w = std::max(8.0 * (hi - lo), 1e-12 * f.tau);
            cands.push_back({std::max(t_floor, t0 - w), std::min(f.tau, t0 + w)});
        }
    }
    // Merge overlapping windows so the dense rescan sees each zero once.
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) { return a.lo < b.lo; });
    std::vector<Candidate> spans;
    for (const auto& c : cands) {
        if (!spans.empty() && c.lo <= spans.back().hi) {
            spans.back().hi = std::max(spans.back().hi, c.hi);
        } else {
            spans.push_back(c);
        }
    }
    cands = std::move(spans);

    // A candidate cell may hide two nearby crossings (a tangential touch
    // split by a small omega offset), so rescan it densely and refine every
    // local dip separately.
    std::vector<std::pair<double, double>> dips; // (lo, hi) brackets
    const double cell = f.tau / static_cast<double>(grid_n);
    for (const auto& c : cands) {
        const int kLoc = std::min(
            2048, 128 * std::max(2, static_cast<int>(std::ceil((c.hi - c.lo) / cell))));
        std::vector<double> ls(kLoc + 1);
        auto lt = [&](int k) { return c.lo + (c.hi - c.lo) * k / kLoc; };
        for (int k = 0; k <= kLoc; ++k) ls[k] = sigma_min(f.value(lt(k)), omega);
        for (int k = 1; k < kLoc; ++k) {
            if (ls[k] <= ls[k - 1] && ls[k] <= ls[k + 1]) {
                dips.emplace_back(lt(k - 1), lt(k + 1));
            }
        }
        if (ls[0] < ls[1]) dips.emplace_back(c.lo, lt(1));
        if (ls[kLoc] < ls[kLoc - 1]) dips.emplace_back(lt(kLoc - 1), c.hi);
    }

    std::vector<double> crossings;
    // The terminal crossing is certified by nu_end, which is eigenvalue-based
    // and immune to the integration drift that inflates sigma_min near tau
    // and drags the numerical minimizer slightly inside the interval.
    if (nu_end >= 1) crossings.push_back(f.tau);
    auto fn = [&](double t) { return sigma_min(f.value(t), omega); };
    auto eig_dist = [&](double t) {
        Eigen::ComplexEigenSolver<CMat> es(f.value(t).cast<Complex>(), false);
        double d = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            d = std::min(d, std::abs(es.eigenvalues()(k) - omega));
        }
        return d;
    };
    auto try_accept = [&](double lo, double hi) -> double {
        double t_star = golden_min(fn, lo, hi, tol.max_refine);
        if (nu_end >= 1 && t_star >= ts[ts.size() - 2]) return -1.0;
        double s_star = fn(t_star);
        const Mat g = f.value(t_star);
        CMat a = g.cast<Complex>() -
                 omega * CMat::Identity(g.rows(), g.cols());
        const double smax = std::max(1.0, a.norm());
        const double cross_thresh = 1e-9 * smax;
        if (s_star <= cross_thresh) return t_star;
        if (s_star <= 10.0 * cross_thresh) {
            // A defective (Jordan) eigenvalue flattens sigma_min into a
            // quadratic dip whose numerical floor can sit inside this band.
            // The eigenvalues themselves still pass through omega exactly,
            // so refine the eigenvalue distance instead and certify on it.
            const double w = 4.0 * (hi - lo);
            const double t2 =
                golden_min(eig_dist, std::max(t_floor, t_star - w),
                           std::min(f.tau, t_star + w), tol.max_refine);
            const double d2 = eig_dist(t2);
            if (d2 <= 1e-8) {
                if (nu_end >= 1 && t2 >= ts[ts.size() - 2]) return -1.0;
                return t2;
            }
            if (d2 <= 1e-6) {
                throw ResolutionError(
                    "omega_index: cannot certify crossing at t = " +
                    std::to_string(t_star) + " (sigma_min = " +
                    std::to_string(s_star) + ")");
            }
        }
        return -1.0;
    };
    for (const auto& [dlo, dhi] : dips) {
        const double t0 = try_accept(dlo, dhi);
        if (t0 < 0.0) continue;
        crossings.push_back(t0);
        // Two eigen-branches can pass omega almost simultaneously (their
        // curves intersect near this angle), collapsing two zeros into one
        // dip at scan resolution; sweep a punctured neighborhood for the
        // second zero.
        const double w = 3.0 * (dhi - dlo);
        const double excl = 1e-7 * f.tau;
        const std::pair<double, double> sides[2] = {
            {std::max(t_floor, t0 - w), t0 - excl},
            {t0 + excl, std::min(f.tau, t0 + w)}};
        for (int side = 0; side < 2; ++side) {
            const auto& [lo2, hi2] = sides[side];
            if (hi2 - lo2 <= excl) continue;
            constexpr int kNb = 128;
            int best = -1;
            double bs = std::numeric_limits<double>::infinity();
            std::array<double, kNb> s2{};
            for (int k = 1; k < kNb; ++k) {
                s2[k] = fn(lo2 + (hi2 - lo2) * k / kNb);
                if (s2[k] < bs) { bs = s2[k]; best = k; }
            }
            if (best < 0 || bs > 1e-3) continue;
            // A genuine second zero is separated from t0 by a ridge of
            // sigma; without one the dip is just the flank of the crossing
            // already accepted (a defective zero recovers very slowly).
            double ridge = 0.0;
            if (side == 0) { // t0 lies beyond hi2
                for (int k = best + 1; k < kNb; ++k) ridge = std::max(ridge, s2[k]);
            } else {         // t0 lies before lo2
                for (int k = 1; k < best; ++k) ridge = std::max(ridge, s2[k]);
            }
            if (ridge < 8.0 * bs) continue;
            const double t1 = try_accept(lo2 + (hi2 - lo2) * (best - 1) / kNb,
                                         lo2 + (hi2 - lo2) * (best + 1) / kNb);
            if (t1 >= 0.0) crossings.push_back(t1);
        }
    }
    std::sort(crossings.begin(), crossings.end());
    crossings.erase(std::unique(crossings.begin(), crossings.end(),
                                [&](double a, double b) {
                                    return std::abs(a - b) < 1e-8 * f.tau;
                                }),
                    crossings.end());

    for (double t_star : crossings) {
        const Mat g_star = f.value(t_star);
        KernelData kd = kernel_basis(g_star, omega, tol.rank_rel);
        const bool at_end = t_star > f.tau * (1.0 - 1e-9);
        bool at_break = false;
        for (double bp : f.breakpoints)
            if (std::abs(t_star - bp) < 1e-8 * f.tau) at_break = true;

        // An interior crossing at a defective omega flattens the crossing
        // form on the geometric (Krein-isotropic) kernel to zero; restrict
        // to the generalized kernel instead, where the form stays
        // nondegenerate (a mixed Krein pair, net signature zero).
        auto signature = [&](int side, bool* degen) {
            const Mat b = factor_bfield(f, t_star, side);
            int sig = form_signature(kd.basis, b, degen);
            if (*degen && !at_end) {
                const int alg = algebraic_mult(g_star, omega);
                if (alg > kd.basis.cols()) {
                    CMat gen = generalized_kernel(g_star, omega, alg);
                    sig = form_signature(gen, b, degen);
                }
            }
            return sig;
        };

        bool degen = false;
        if (at_end) {
            int sig = form_signature(kd.basis, factor_bfield(f, f.tau, -1),
                                     &degen);
            if (degen) return fallback();
            mu2 += sig;
        } else if (at_break) {
            int sl = signature(-1, &degen);
            bool degen2 = false;
            int sr = signature(+1, &degen2);
            if (degen || degen2) return fallback();
            mu2 += sl + sr;
        } else {
            int sig = signature(0, &degen);
            if (degen) return fallback();
            mu2 += 2 * sig;
        }
    }

    return mu2 - nu_end;
}

} // namespace

OmegaIndex omega_index(const SymplecticPath& gamma, Complex omega,
                       const Tolerances& tol) {
    if (std::abs(std::abs(omega) - 1.0) > 1e-9) {
        throw RangeError("omega_index: omega must have unit modulus");
    }
    long i2 = 0;
    int nu = 0;
    for (const auto& f : gamma.factors()) {
        i2 += factor_index2(f, omega, tol, 0);
        nu += nu_omega(f.value(f.tau), omega, tol);
    }
    if (i2 % 2 != 0) {
        throw InvariantViolation(
            "omega_index: half-integer total, a crossing was missed");
    }
    const long idx = i2 / 2;
    // Parity cross-check at real omega: for nondegenerate endpoints,
    // sign D_omega(gamma(tau)) = (-1)^{index+1}.
    if (nu == 0 && std::abs(omega.imag()) < 1e-12) {
        const double d = d_omega(gamma.at(gamma.tau()), omega, tol);
        const int want_odd = d > 0 ? 1 : 0;
        if (((idx % 2) + 2) % 2 != want_odd) {
            throw InvariantViolation(
                "omega_index: parity inconsistent with sign of D_omega");
        }
    }
    return {idx, nu};
}

std::pair<int, int> splitting_numbers(const SymplecticMatrix& m, Complex omega,
                                      const SymplecticPath& generator,
                                      const Tolerances& tol) {
    if ((generator.at(generator.tau()) - m.entries()).cwiseAbs().maxCoeff() >
        1e-6) {
        throw RangeError("splitting_numbers: generator does not end at M");
    }
    auto at = [&](double eps) {
        Complex w = omega * Complex(std::cos(eps), std::sin(eps));
        return omega_index(generator, w, tol).index;
    };
    const double d = tol.perturb_delta;
    const long i0 = omega_index(generator, omega, tol).index;
    const long sp = at(d) - i0;
    const long sm = at(-d) - i0;
    if (at(d / 2) - i0 != sp || at(-d / 2) - i0 != sm) {
        throw StabilityError("splitting_numbers: unstable under delta halving");
    }
    return {static_cast<int>(sp), static_cast<int>(sm)};
}

double mean_index(const SymplecticPath& gamma, const Tolerances& tol) {
    CircleSpectrum cs = circle_spectrum(gamma.endpoint(), tol);
    std::vector<double> angles;
    for (const auto& e : cs.eigenvalues) {
        double a = std::arg(e.omega);
        if (a < 0) a += 2 * kPi;
        angles.push_back(a);
    }
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double a, double b) { return b - a < 1e-9; }),
                 angles.end());

    auto idx_at = [&](double ang) {
        return omega_index(gamma, Complex(std::cos(ang), std::sin(ang)), tol)
            .index;
    };

    if (angles.empty()) {
        long a = idx_at(0.7310), b = idx_at(2.9041);
        if (a != b) {
            throw ConsistencyError("mean_index: arc evaluations disagree",
                                   static_cast<double>(a),
                                   static_cast<double>(b));
        }
        return static_cast<double>(a);
    }

    double total = 0.0;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        double lo = angles[k];
        double hi = (k + 1 < angles.size()) ? angles[k + 1] : angles[0] + 2 * kPi;
        double len = hi - lo;
        if (len < 1e-9) continue;
        // Slightly irrational interior fractions dodge accidental tangency
        // values such as omega = -1.
        long a = idx_at(lo + 0.3179 * len);
        long b = idx_at(lo + 0.6843 * len);
        if (a != b) {
            throw ConsistencyError("mean_index: arc evaluations disagree",
                                   static_cast<double>(a),
                                   static_cast<double>(b));
        }
        total += len * static_cast<double>(a);
    }
    return total / (2 * kPi);
}

std::optional<std::pair<long, long>> rational_angle(double x, int q_max,
                                                    double tol) {
    // Continued-fraction convergents of x.
    long p0 = 1, q0 = 0, p1 = static_cast<long>(std::floor(x)), q1 = 1;
    double frac = x - std::floor(x);
    for (int it = 0; it < 64; ++it) {
        if (std::abs(x - static_cast<double>(p1) / q1) <= tol && q1 <= q_max) {
            long g = std::gcd(std::abs(p1), q1);
            return std::make_pair(p1 / g, q1 / g);
        }
        if (frac < 1e-15) break;
        double inv = 1.0 / frac;
        long a = static_cast<long>(std::floor(inv));
        frac = inv - std::floor(inv);
        long p2 = a * p1 + p0, q2 = a * q1 + q0;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        if (q1 > 100000000L) break;
    }
    if (std::abs(x - static_cast<double>(p1) / q1) <= tol && q1 <= q_max) {
        long g = std::gcd(std::abs(p1), q1);
        return std::make_pair(p1 / g, q1 / g);
    }
    return std::nullopt;
}

std::pair<long, bool> minimal_period_K(const SymplecticMatrix& m,
                                       const Tolerances& tol) {
    CircleSpectrum cs = circle_spectrum(m, tol);
    long l = 1;
    bool unbounded = false;
    for (const auto& e : cs.eigenvalues) {
        if (e.omega.imag() < -1e-12) continue; // conjugates carry the same angle
        double x = std::arg(e.omega) / (2 * kPi);
        if (x < 0) x += 1.0;
        auto r = rational_angle(x, tol.q_max, tol.angle_tol);
        if (r) {
            l = std::lcm(l, r->second);
        } else if (rational_angle(x, 1024 * tol.q_max, 1e-4 * tol.angle_tol)) {
            unbounded = true; // rational, but beyond the denominator cap
        }
    }
    return {2 * l, unbounded};
}

std::vector<BasicNormalForm> normal_form_decomposition(const SymplecticMatrix& m,
                                                       const Tolerances& tol) {
    const Mat& a = m.entries();
    const int dim = m.dim();
    const Mat j = standard_J(m.n());
    CircleSpectrum cs = circle_spectrum(m, tol);

    std::vector<BasicNormalForm> n1_pos, n1_neg, rots, hyp_pos, hyp_neg;

    auto real_unity_blocks = [&](double lambda, std::vector<BasicNormalForm>& out) {
        int alg = 0, geom = 0;
        for (const auto& e : cs.eigenvalues) {
            if (std::abs(e.omega - Complex(lambda, 0)) < 1e-9) {
                alg = e.alg;
                geom = e.geom;
            }
        }
        if (alg == 0) return;
        Mat nmat = a - lambda * Mat::Identity(dim, dim);
        // Generalized eigenspace = kernel of N^2.
        Eigen::JacobiSVD<Mat> svd(nmat * nmat, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double thr = tol.rank_rel * std::max(sv(0), 1.0);
        int wdim = 0;
        for (int i = 0; i < dim; ++i)
            if (sv(i) <= thr) ++wdim;
        if (wdim != alg || alg > 2 * geom) {
            throw UnsupportedNormalFormError(
                "normal_form_decomposition: Jordan structure at lambda = " +
                std::to_string(lambda) + " beyond 2x2 blocks");
        }
        const int r = alg - geom;       // Jordan pairs -> N1(lambda, +-1)
        const int s1 = 2 * geom - alg;  // simple -> N1(lambda, 0)
        if (r > 0) {
            Mat q = svd.matrixV().rightCols(wdim);
            // q(v) = <v, J N v> restricted to the generalized eigenspace; its
            // signature counts the +-1 Jordan signs.
            Mat form = q.transpose() * j * nmat * q;
            form = (0.5 * (form + form.transpose())).eval();
            Eigen::SelfAdjointEigenSolver<Mat> es(form);
            int plus = 0, minus = 0;
            const double fthr = 1e-6 * std::max(1.0, form.cwiseAbs().maxCoeff());
            for (int i = 0; i < es.eigenvalues().size(); ++i) {
                if (es.eigenvalues()(i) > fthr) ++plus;
                else if (es.eigenvalues()(i) < -fthr) ++minus;
            }
            if (plus + minus != r) {
                throw UnsupportedNormalFormError(
                    "normal_form_decomposition: degenerate Jordan form at "
                    "lambda = " + std::to_string(lambda));
            }
            for (int i = 0; i < plus; ++i)
                out.push_back(BasicNormalForm::N1(lambda, 1));
            for (int i = 0; i < minus; ++i)
                out.push_back(BasicNormalForm::N1(lambda, -1));
        }
        for (int i = 0; i < s1; ++i) out.push_back(BasicNormalForm::N1(lambda, 0));
    };

    real_unity_blocks(1.0, n1_pos);
    real_unity_blocks(-1.0, n1_neg);

    for (const auto& e : cs.eigenvalues) {
        if (e.omega.imag() <= 1e-12) continue; // one of each conjugate pair
        if (e.alg != e.geom) {
            throw UnsupportedNormalFormError(
                "normal_form_decomposition: non-semisimple circle eigenvalue "
                "(N2 block) not splittable");
        }
        const double theta = std::arg(e.omega); // in (0, pi)
        CMat ac = a.cast<Complex>() - e.omega * CMat::Identity(dim, dim);
        Eigen::JacobiSVD<CMat> svd(ac, Eigen::ComputeFullV);
        CMat basis = svd.matrixV().rightCols(e.geom);
        CMat gram = basis.adjoint() * (Complex(0, -1) * j.cast<Complex>()) * basis;
        gram = Complex(0.5, 0) * (gram + gram.adjoint().eval());
        Eigen::SelfAdjointEigenSolver<CMat> es(gram);
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            double kappa = es.eigenvalues()(i);
            if (std::abs(kappa) < 1e-6) {
                throw UnsupportedNormalFormError(
                    "normal_form_decomposition: vanishing Krein form");
            }
            rots.push_back(BasicNormalForm::R(kappa > 0 ? theta : 2 * kPi - theta));
        }
    }

    // Off-circle spectrum: report homotopy-class representatives only.
    for (Complex lam : off_circle_spectrum(m, tol)) {
        if (std::abs(lam) < 1.0) continue; // keep the expanding representative
        if (std::abs(lam.imag()) <= 1e-9 * std::abs(lam)) {
            (lam.real() > 0 ? hyp_pos : hyp_neg)
                .push_back(BasicNormalForm::D(lam.real() > 0 ? 2 : -2));
        } else if (lam.imag() > 0) {
            // Complex quadruple: same component as two positive hyperbolics.
            hyp_pos.push_back(BasicNormalForm::D(2));
            hyp_pos.push_back(BasicNormalForm::D(2));
        }
    }

    std::sort(rots.begin(), rots.end(),
              [](const BasicNormalForm& x, const BasicNormalForm& y) {
                  return x.theta < y.theta;
              });

    std::vector<BasicNormalForm> out;
    auto append = [&](const std::vector<BasicNormalForm>& v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    append(n1_pos);
    append(n1_neg);
    append(rots);
    append(hyp_pos);
    append(hyp_neg);

    int total = 0;
    for (const auto& nf : out) total += nf.half_dim();
    if (total != m.n()) {
        throw NumericalError(
            "normal_form_decomposition: block dimensions sum to " +
            std::to_string(total) + ", expected " + std::to_string(m.n()));
    }
    return out;
}

IndexProfile iteration_profile(const SymplecticPath& gamma, int m_max,
                               const Tolerances& tol) {
    if (m_max < 2) throw RangeError("iteration_profile: m_max must be >= 2");
    IndexProfile p;
    p.n = gamma.n();

    OmegaIndex first = omega_index(gamma, Complex(1, 0), tol);
    p.i1 = first.index;
    p.nu1 = first.nullity;
    p.table.push_back({1, first.index, first.nullity});
    for (int m = 2; m <= m_max; ++m) {
        SymplecticPath it = iterate_path(gamma, m);
        OmegaIndex oi = omega_index(it, Complex(1, 0), tol);
        p.table.push_back({m, oi.index, oi.nullity});
        if (oi.nullity < 0 || oi.nullity > 2 * gamma.n()) {
            throw InvariantViolation("iteration_profile: nullity out of range");
        }
    }

    const double mean_a = mean_index(gamma, tol);

    SymplecticMatrix end = gamma.endpoint();
    bool decomposed = false;
    double base = 0.0;
    try {
        auto nfs = normal_form_decomposition(end, tol);
        for (const auto& nf : nfs) {
            switch (nf.kind) {
                case BasicNormalForm::Kind::R: base += nf.theta / kPi; break;
                case BasicNormalForm::Kind::N2: base += 2 * nf.theta / kPi; break;
                case BasicNormalForm::Kind::N1:
                    if (nf.lambda < 0) base += 1.0;
                    break;
                case BasicNormalForm::Kind::D:
                    if (nf.lambda < 0) base += 1.0;
                    break;
            }
        }
        decomposed = true;
    } catch (const UnsupportedNormalFormError&) {
        p.single_source = true;
    }
    if (decomposed) {
        // The decomposition pins the mean index modulo 2 (full turns of the
        // rotation factors are invisible in the endpoint).
        const double k = (mean_a - base) / 2.0;
        const double mean_b = base + 2.0 * std::round(k);
        if (std::abs(mean_a - mean_b) > tol.mean_tol) {
            throw ConsistencyError(
                "iteration_profile: mean index disagrees with rotation-angle "
                "route", mean_a, mean_b);
        }
    }
    p.mean_index = mean_a;

    for (const auto& t : p.table) {
        if (std::abs(static_cast<double>(t[1]) - t[0] * p.mean_index) >
            2.0 * gamma.n() + 1e-6) {
            throw InvariantViolation(
                "iteration_profile: |i(m) - m*mean| exceeds 2n");
        }
    }

    // Splitting numbers from the circle step function: the one-sided limits
    // are the constant arc values next to each eigenvalue angle, which are
    // evaluated far from the angle itself and therefore immune to the
    // defect-driven eigenvalue splitting of integrated monodromies that can
    // destabilize small-delta probes.
    CircleIndexData cd = circle_index_data(gamma, tol);
    for (std::size_t k = 0; k < cd.angles.size(); ++k) {
        const std::size_t prev = (k + cd.angles.size() - 1) % cd.angles.size();
        const int sp = static_cast<int>(cd.i_arc[k] - cd.i_at[k]);
        const int sm = static_cast<int>(cd.i_arc[prev] - cd.i_at[k]);
        if (sp < 0 || sm < 0 || sp > cd.nu_at[k] || sm > cd.nu_at[k]) {
            throw InvariantViolation(
                "iteration_profile: splitting numbers outside [0, nu]");
        }
        p.splitting.push_back({std::polar(1.0, cd.angles[k]), sp, sm});
    }

    auto [kk, unbounded] = minimal_period_K(end, tol);
    p.K = kk;
    p.k_unbounded = unbounded;
    return p;
}

CircleIndexData circle_index_data(const SymplecticPath& gamma,
                                  const Tolerances& tol) {
    CircleIndexData data;
    data.n = gamma.n();
    SymplecticMatrix end = gamma.endpoint();
    CircleSpectrum cs = circle_spectrum(end, tol);

    for (const auto& e : cs.eigenvalues) {
        double a = std::arg(e.omega);
        if (a < 0) a += 2 * kPi;
        data.angles.push_back(a);
    }
    std::sort(data.angles.begin(), data.angles.end());
    data.angles.erase(
        std::unique(data.angles.begin(), data.angles.end(),
                    [](double a, double b) { return b - a < 1e-9; }),
        data.angles.end());

    auto idx_at = [&](double ang) {
        return omega_index(gamma, std::polar(1.0, ang), tol);
    };
    auto arc_value = [&](double lo, double len) {
        // Slightly irrational interior fractions dodge accidental tangencies.
        OmegaIndex a = idx_at(lo + 0.3179 * len);
        OmegaIndex b = idx_at(lo + 0.6843 * len);
        if (a.index != b.index) {
            throw ConsistencyError("circle_index_data: arc evaluations disagree",
                                   static_cast<double>(a.index),
                                   static_cast<double>(b.index));
        }
        return a.index;
    };

    if (data.angles.empty()) {
        data.i_arc.push_back(arc_value(0.0, 2 * kPi));
        return data;
    }
    // The path is real, so index and nullity are invariant under conjugation
    // of omega; evaluate the lower half-circle and mirror the upper half.
    auto find_angle = [&](double a) -> int {
        a = std::fmod(a, 2 * kPi);
        if (a < 0) a += 2 * kPi;
        for (std::size_t j = 0; j < data.angles.size(); ++j) {
            double d = std::abs(a - data.angles[j]);
            d = std::min(d, 2 * kPi - d);
            if (d < 1e-9) return static_cast<int>(j);
        }
        return -1;
    };
    for (std::size_t k = 0; k < data.angles.size(); ++k) {
        const double lo = data.angles[k];
        const double hi = k + 1 < data.angles.size() ? data.angles[k + 1]
                                                     : data.angles[0] + 2 * kPi;
        const int src = lo > kPi + 1e-9 ? find_angle(2 * kPi - lo) : -1;
        if (src >= 0 && src < static_cast<int>(k)) {
            data.i_at.push_back(data.i_at[src]);
            data.nu_at.push_back(data.nu_at[src]);
        } else {
            OmegaIndex oi = idx_at(lo);
            data.i_at.push_back(oi.index);
            data.nu_at.push_back(oi.nullity);
        }
        const int asrc = lo > kPi - 1e-9 ? find_angle(2 * kPi - hi) : -1;
        if (asrc >= 0 && asrc < static_cast<int>(k)) {
            data.i_arc.push_back(data.i_arc[asrc]);
        } else {
            data.i_arc.push_back(arc_value(lo, hi - lo));
        }
    }
    return data;
}

namespace {

// Matching band for "this root of unity is an eigenvalue angle": wide enough
// to absorb integration error in the monodromy (simple circle eigenvalues
// carry ~1e-10 of it, and real ones are snapped exactly), far below any root
// spacing we tabulate.
constexpr double kAngleMatch = 1e-8;

int angle_slot(const CircleIndexData& data, double phi) {
    phi = std::fmod(phi, 2 * kPi);
    if (phi < 0) phi += 2 * kPi;
    for (std::size_t k = 0; k < data.angles.size(); ++k) {
        double d = std::abs(phi - data.angles[k]);
        d = std::min(d, 2 * kPi - d);
        if (d <= kAngleMatch) return static_cast<int>(k);
    }
    return -1;
}

} // namespace

long CircleIndexData::index_at_angle(double phi) const {
    if (angles.empty()) return i_arc[0];
    const int hit = angle_slot(*this, phi);
    if (hit >= 0) return i_at[hit];
    phi = std::fmod(phi, 2 * kPi);
    if (phi < 0) phi += 2 * kPi;
    // arc k covers (angles[k], angles[k+1]); below angles[0] wraps to the
    // last arc
    std::size_t k = angles.size() - 1;
    while (k > 0 && angles[k] > phi) --k;
    if (phi < angles[0]) k = angles.size() - 1;
    return i_arc[k];
}

int CircleIndexData::nullity_at_angle(double phi) const {
    const int hit = angle_slot(*this, phi);
    return hit >= 0 ? nu_at[hit] : 0;
}

double CircleIndexData::mean() const {
    if (angles.empty()) return static_cast<double>(i_arc[0]);
    double total = 0.0;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        const double lo = angles[k];
        const double hi =
            k + 1 < angles.size() ? angles[k + 1] : angles[0] + 2 * kPi;
        total += (hi - lo) * static_cast<double>(i_arc[k]);
    }
    return total / (2 * kPi);
}

std::vector<std::array<long, 3>> bott_iteration_table(
    const CircleIndexData& data, int m_max) {
    if (m_max < 1) throw RangeError("bott_iteration_table: m_max must be >= 1");
    std::vector<std::array<long, 3>> table;
    table.reserve(m_max);
    for (int m = 1; m <= m_max; ++m) {
        long i = 0, nu = 0;
        for (int k = 0; k < m; ++k) {
            const double phi = 2 * kPi * k / m;
            i += data.index_at_angle(phi);
            nu += data.nullity_at_angle(phi);
        }
        table.push_back({m, i, nu});
    }
    return table;
}

std::vector<std::array<long, 3>> ekeland_index(const IndexProfile& profile,
                                               int n) {
    std::vector<std::array<long, 3>> out;
    out.reserve(profile.table.size());
    for (const auto& t : profile.table) {
        out.push_back({t[0], t[1] - n, t[2]});
    }
    return out;
}

nlohmann::json IndexProfile::to_json() const {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : table) jt.push_back({t[0], t[1], t[2]});
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : splitting) {
        js.push_back({s.omega.real(), s.omega.imag(), s.s_plus, s.s_minus});
    }
    nlohmann::json out{{"i1", i1},         {"nu1", nu1},
                       {"table", jt},      {"mean_index", mean_index},
                       {"splitting", js}};
    if (k_unbounded) {
        out["K"] = "unbounded-denominator";
    } else {
        out["K"] = K;
    }
    return out;
}

} // namespace cchar
