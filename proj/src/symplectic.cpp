#include "cchar/symplectic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

namespace cchar {

Mat standard_J(int n) {
    Mat j = Mat::Zero(2 * n, 2 * n);
    j.topRightCorner(n, n) = -Mat::Identity(n, n);
    j.bottomLeftCorner(n, n) = Mat::Identity(n, n);
    return j;
}

double symplectic_defect(const Mat& m) {
    const int n = static_cast<int>(m.rows()) / 2;
    const Mat j = standard_J(n);
    return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

SymplecticMatrix::SymplecticMatrix(Mat entries, double tol_symp)
    : n_(static_cast<int>(entries.rows()) / 2), m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() % 2 != 0 || m_.rows() == 0) {
        throw RangeError("SymplecticMatrix: need a square 2n x 2n matrix");
    }
    const double defect = symplectic_defect(m_);
    if (!(defect <= tol_symp)) {
        throw InvariantViolation("SymplecticMatrix: M^T J M - J defect " +
                                 std::to_string(defect) + " exceeds tolerance");
    }
    const double det = m_.determinant();
    if (!(std::abs(det - 1.0) <= std::max(tol_symp * 1e2, 1e-8))) {
        throw InvariantViolation("SymplecticMatrix: det(M) = " +
                                 std::to_string(det) + " is not 1");
    }
}

SymplecticMatrix SymplecticMatrix::identity(int n) {
    return SymplecticMatrix(Mat::Identity(2 * n, 2 * n));
}

SymplecticMatrix SymplecticMatrix::operator*(const SymplecticMatrix& rhs) const {
    return SymplecticMatrix(m_ * rhs.m_, 1e-6);
}

SymplecticMatrix SymplecticMatrix::inverse() const {
    // M^{-1} = -J M^T J, exact up to the symplecticity defect of M.
    const Mat j = standard_J(n_);
    return SymplecticMatrix(-j * m_.transpose() * j, 1e-6);
}

SymplecticMatrix SymplecticMatrix::power(int k) const {
    if (k < 0) return inverse().power(-k);
    Mat acc = Mat::Identity(2 * n_, 2 * n_);
    for (int i = 0; i < k; ++i) acc = acc * m_;
    return SymplecticMatrix(acc, 1e-6);
}

Mat diamond(const Mat& m1, const Mat& m2) {
    const int n1 = static_cast<int>(m1.rows()) / 2;
    const int n2 = static_cast<int>(m2.rows()) / 2;
    const int n = n1 + n2;
    Mat r = Mat::Zero(2 * n, 2 * n);
    r.block(0, 0, n1, n1) = m1.block(0, 0, n1, n1);            // A1
    r.block(0, n, n1, n1) = m1.block(0, n1, n1, n1);           // B1
    r.block(n, 0, n1, n1) = m1.block(n1, 0, n1, n1);           // C1
    r.block(n, n, n1, n1) = m1.block(n1, n1, n1, n1);          // D1
    r.block(n1, n1, n2, n2) = m2.block(0, 0, n2, n2);          // A2
    r.block(n1, n + n1, n2, n2) = m2.block(0, n2, n2, n2);     // B2
    r.block(n + n1, n1, n2, n2) = m2.block(n2, 0, n2, n2);     // C2
    r.block(n + n1, n + n1, n2, n2) = m2.block(n2, n2, n2, n2);// D2
    return r;
}

SymplecticMatrix diamond(const SymplecticMatrix& m1, const SymplecticMatrix& m2) {
    return SymplecticMatrix(diamond(m1.entries(), m2.entries()), 1e-8);
}

SymplecticMatrix diamond_power(const SymplecticMatrix& m, int k) {
    if (k < 1) throw RangeError("diamond_power: k must be positive");
    SymplecticMatrix acc = m;
    for (int i = 1; i < k; ++i) acc = diamond(acc, m);
    return acc;
}

int nu_omega(const Mat& m, Complex omega, const Tolerances& tol) {
    if (std::abs(std::abs(omega) - 1.0) > tol.eig) {
        throw RangeError("nu_omega: omega must lie on the unit circle");
    }
    const int dim = static_cast<int>(m.rows());
    CMat a = m.cast<Complex>() - omega * CMat::Identity(dim, dim);
    Eigen::JacobiSVD<CMat> svd(a);
    const auto& sv = svd.singularValues();
    const double thresh = tol.rank_rel * std::max(sv(0), 1.0);
    int k = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) <= thresh) ++k;
    return k;
}

int nu_omega(const SymplecticMatrix& m, Complex omega, const Tolerances& tol) {
    return nu_omega(m.entries(), omega, tol);
}

double d_omega(const Mat& m, Complex omega, const Tolerances& tol) {
    const int dim = static_cast<int>(m.rows());
    const int n = dim / 2;
    CMat a = m.cast<Complex>() - omega * CMat::Identity(dim, dim);
    Complex det = a.determinant();
    Complex val = std::pow(std::conj(omega), n) * det;
    const double sign = (n % 2 == 0) ? -1.0 : 1.0; // (-1)^{n-1}
    val *= sign;
    const double residue_cap = std::max(tol.symp * 1e3 * std::max(1.0, std::abs(val)), 1e-9);
    if (std::abs(val.imag()) > residue_cap) {
        throw NumericalError("d_omega: imaginary residue " +
                             std::to_string(val.imag()) + " too large");
    }
    return val.real();
}

double d_omega(const SymplecticMatrix& m, Complex omega, const Tolerances& tol) {
    return d_omega(m.entries(), omega, tol);
}

BasicNormalForm BasicNormalForm::D(double lambda) {
    BasicNormalForm nf;
    nf.kind = Kind::D;
    nf.lambda = lambda;
    return nf;
}

BasicNormalForm BasicNormalForm::N1(double lambda, double b) {
    BasicNormalForm nf;
    nf.kind = Kind::N1;
    nf.lambda = lambda;
    nf.b = b;
    return nf;
}

BasicNormalForm BasicNormalForm::R(double theta) {
    BasicNormalForm nf;
    nf.kind = Kind::R;
    nf.theta = theta;
    return nf;
}

BasicNormalForm BasicNormalForm::N2(double theta, const Eigen::Matrix2d& b) {
    BasicNormalForm nf;
    nf.kind = Kind::N2;
    nf.theta = theta;
    nf.b2 = b;
    return nf;
}

bool BasicNormalForm::operator==(const BasicNormalForm& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
        case Kind::D: return lambda == o.lambda;
        case Kind::N1: return lambda == o.lambda && b == o.b;
        case Kind::R: return theta == o.theta;
        case Kind::N2: return theta == o.theta && b2 == o.b2;
    }
    return false;
}

namespace {

constexpr double kPi = std::numbers::pi;

bool valid_theta(double theta) {
    return theta > 0.0 && theta < 2.0 * kPi && std::abs(theta - kPi) > 0.0;
}

} // namespace

SymplecticMatrix realize(const BasicNormalForm& nf) {
    using Kind = BasicNormalForm::Kind;
    switch (nf.kind) {
        case Kind::D: {
            if (nf.lambda != 2.0 && nf.lambda != -2.0)
                throw RangeError("D(lambda): lambda must be +-2");
            Mat m(2, 2);
            m << nf.lambda, 0.0, 0.0, 1.0 / nf.lambda;
            return SymplecticMatrix(m);
        }
        case Kind::N1: {
            if (nf.lambda != 1.0 && nf.lambda != -1.0)
                throw RangeError("N1(lambda,b): lambda must be +-1");
            if (nf.b != -1.0 && nf.b != 0.0 && nf.b != 1.0)
                throw RangeError("N1(lambda,b): b must be -1, 0 or 1");
            Mat m(2, 2);
            m << nf.lambda, nf.b, 0.0, nf.lambda;
            return SymplecticMatrix(m);
        }
        case Kind::R: {
            if (!valid_theta(nf.theta))
                throw RangeError("R(theta): theta must be in (0,pi) u (pi,2pi)");
            Mat m(2, 2);
            m << std::cos(nf.theta), -std::sin(nf.theta),
                 std::sin(nf.theta), std::cos(nf.theta);
            return SymplecticMatrix(m);
        }
        case Kind::N2: {
            if (!valid_theta(nf.theta))
                throw RangeError("N2(theta,b): theta must be in (0,pi) u (pi,2pi)");
            if (nf.b2(0, 1) == nf.b2(1, 0))
                throw RangeError("N2(theta,b): b2 must have b_2 != b_3");
            Mat r(2, 2);
            r << std::cos(nf.theta), -std::sin(nf.theta),
                 std::sin(nf.theta), std::cos(nf.theta);
            Mat m = Mat::Zero(4, 4);
            m.block(0, 0, 2, 2) = r;
            m.block(0, 2, 2, 2) = nf.b2;
            m.block(2, 2, 2, 2) = r;
            // The ctor rejects b2 that breaks R(theta)^T b2 symmetry.
            return SymplecticMatrix(m);
        }
    }
    throw RangeError("realize: unknown normal form kind");
}

SymplecticMatrix realize(const std::vector<BasicNormalForm>& nfs) {
    if (nfs.empty()) throw RangeError("realize: empty normal form list");
    SymplecticMatrix acc = realize(nfs.front());
    for (std::size_t i = 1; i < nfs.size(); ++i) {
        acc = diamond(acc, realize(nfs[i]));
    }
    return acc;
}

int CircleSpectrum::total_alg() const {
    int s = 0;
    for (const auto& e : eigenvalues) s += e.alg;
    return s;
}

CircleSpectrum circle_spectrum(const SymplecticMatrix& m, const Tolerances& tol) {
    const Mat& a = m.entries();
    Eigen::EigenSolver<Mat> es(a);
    const Eigen::VectorXcd ev = es.eigenvalues();
    const int dim = static_cast<int>(ev.size());

    // Greedy clustering; a Jordan pair computed from a matrix with defect
    // eps splits its eigenvalue by O(sqrt(eps)), so the radius must be much
    // wider than tol.eig.
    const double cluster_radius = std::max(1e-4, std::sqrt(tol.eig));
    std::vector<int> label(dim, -1);
    std::vector<std::vector<int>> clusters;
    for (int i = 0; i < dim; ++i) {
        bool placed = false;
        for (std::size_t c = 0; c < clusters.size() && !placed; ++c) {
            for (int k : clusters[c]) {
                if (std::abs(ev(i) - ev(k)) <= cluster_radius) {
                    clusters[c].push_back(i);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) clusters.push_back({i});
    }

    const double snap_radius = std::max(tol.eig, 1e-6);
    // A defective circle eigenvalue splits off the circle by O(sqrt(defect)),
    // far beyond snap_radius; within this band the rank-based nullity at the
    // radially snapped point decides circle membership.
    const double marginal_radius = 1e-3;
    std::vector<CircleSpectrum::Entry> entries;
    for (const auto& cl : clusters) {
        Complex mean(0.0, 0.0);
        for (int k : cl) mean += ev(k);
        mean /= static_cast<double>(cl.size());
        const double mod = std::abs(mean);
        if (std::abs(mod - 1.0) > marginal_radius) continue;
        Complex omega = mean / mod;
        if (std::abs(omega.imag()) <= 1e-7) {
            omega = Complex(omega.real() > 0 ? 1.0 : -1.0, 0.0);
        }
        const int nu = nu_omega(m, omega, tol);
        if (std::abs(mod - 1.0) > snap_radius && nu == 0) continue;
        entries.push_back({omega, static_cast<int>(cl.size()), nu});
    }

    // Merge clusters that snapped to the same circle point.
    std::vector<CircleSpectrum::Entry> merged;
    for (const auto& e : entries) {
        bool found = false;
        for (auto& g : merged) {
            if (std::abs(g.omega - e.omega) <= 1e-7) {
                g.alg += e.alg;
                g.geom = std::max(g.geom, e.geom);
                found = true;
                break;
            }
        }
        if (!found) merged.push_back(e);
    }
    std::sort(merged.begin(), merged.end(), [](const auto& x, const auto& y) {
        double ax = std::arg(x.omega), ay = std::arg(y.omega);
        if (ax < 0) ax += 2.0 * kPi;
        if (ay < 0) ay += 2.0 * kPi;
        return ax < ay;
    });
    return CircleSpectrum{merged};
}

std::vector<Complex> off_circle_spectrum(const SymplecticMatrix& m,
                                         const Tolerances& tol) {
    Eigen::EigenSolver<Mat> es(m.entries());
    const Eigen::VectorXcd ev = es.eigenvalues();
    const int dim = static_cast<int>(ev.size());
    const double cluster_radius = std::max(1e-4, std::sqrt(tol.eig));
    std::vector<std::vector<int>> clusters;
    for (int i = 0; i < dim; ++i) {
        bool placed = false;
        for (std::size_t c = 0; c < clusters.size() && !placed; ++c) {
            for (int k : clusters[c]) {
                if (std::abs(ev(i) - ev(k)) <= cluster_radius) {
                    clusters[c].push_back(i);
                    placed = true;
                    break;
                }
            }
        }
        if (!placed) clusters.push_back({i});
    }
    const double snap_radius = std::max(tol.eig, 1e-6);
    std::vector<Complex> out;
    for (const auto& cl : clusters) {
        Complex mean(0.0, 0.0);
        for (int k : cl) mean += ev(k);
        mean /= static_cast<double>(cl.size());
        const double mod = std::abs(mean);
        if (std::abs(mod - 1.0) <= snap_radius) continue;
        // mirror circle_spectrum: a marginal cluster whose snapped circle
        // point is degenerate belongs to the circle, not here
        if (std::abs(mod - 1.0) <= 1e-3) {
            Complex omega = mean / mod;
            if (std::abs(omega.imag()) <= 1e-7) {
                omega = Complex(omega.real() > 0 ? 1.0 : -1.0, 0.0);
            }
            if (nu_omega(m, omega, tol) >= 1) continue;
        }
        for (std::size_t k = 0; k < cl.size(); ++k) out.push_back(mean);
    }
    return out;
}

nlohmann::json to_json(const SymplecticMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < m.dim(); ++k) row.push_back(m.entries()(i, k));
        rows.push_back(row);
    }
    return nlohmann::json{{"n", m.n()}, {"entries", rows}};
}

SymplecticMatrix symplectic_from_json(const nlohmann::json& j, const Tolerances& tol) {
    const int n = j.at("n").get<int>();
    const auto& rows = j.at("entries");
    Mat m(2 * n, 2 * n);
    for (int i = 0; i < 2 * n; ++i)
        for (int k = 0; k < 2 * n; ++k) m(i, k) = rows.at(i).at(k).get<double>();
    return SymplecticMatrix(m, tol.symp);
}

} // namespace cchar
