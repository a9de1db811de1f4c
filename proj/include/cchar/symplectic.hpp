#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cchar/errors.hpp"
#include "cchar/tolerances.hpp"

namespace cchar {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using Complex = std::complex<double>;

/// The standard structure J = [[0, -I], [I, 0]] on R^{2n}.
Mat standard_J(int n);

/// Max-norm of M^T J M - J.
double symplectic_defect(const Mat& m);

/// A real 2n x 2n matrix satisfying M^T J M = J up to tol.
class SymplecticMatrix {
  public:
    explicit SymplecticMatrix(Mat entries, double tol_symp = Tolerances{}.symp);

    static SymplecticMatrix identity(int n);

    int n() const { return n_; }
    int dim() const { return 2 * n_; }
    const Mat& entries() const { return m_; }

    SymplecticMatrix operator*(const SymplecticMatrix& rhs) const;
    SymplecticMatrix inverse() const;
    SymplecticMatrix power(int k) const;

  private:
    int n_;
    Mat m_;
};

/// Interleaved direct sum preserving the (q, p) block structure:
/// block rows/cols [A1 0 B1 0; 0 A2 0 B2; C1 0 D1 0; 0 C2 0 D2].
SymplecticMatrix diamond(const SymplecticMatrix& m1, const SymplecticMatrix& m2);
Mat diamond(const Mat& m1, const Mat& m2);

/// k-fold diamond power.
SymplecticMatrix diamond_power(const SymplecticMatrix& m, int k);

/// Complex kernel dimension of M - omega I, by singular-value thresholding.
int nu_omega(const SymplecticMatrix& m, Complex omega,
             const Tolerances& tol = {});
int nu_omega(const Mat& m, Complex omega, const Tolerances& tol = {});

/// The real function D_omega(M) = (-1)^{n-1} conj(omega)^n det(M - omega I).
/// The imaginary residue of the complex evaluation is checked and discarded.
double d_omega(const Mat& m, Complex omega, const Tolerances& tol = {});
double d_omega(const SymplecticMatrix& m, Complex omega,
               const Tolerances& tol = {});

/// Basic normal forms D(lambda), N1(lambda, b), R(theta), N2(omega, b).
struct BasicNormalForm {
    enum class Kind { D, N1, R, N2 };

    Kind kind;
    double lambda = 0.0;           // D: +-2; N1: +-1
    double b = 0.0;                // N1: -1, 0, 1
    double theta = 0.0;            // R, N2: (0,pi) u (pi,2pi)
    Eigen::Matrix2d b2 = Eigen::Matrix2d::Zero(); // N2 block, b2(0,1) != b2(1,0)

    static BasicNormalForm D(double lambda);
    static BasicNormalForm N1(double lambda, double b);
    static BasicNormalForm R(double theta);
    static BasicNormalForm N2(double theta, const Eigen::Matrix2d& b);

    int half_dim() const { return kind == Kind::N2 ? 2 : 1; }

    bool operator==(const BasicNormalForm& o) const;
};

/// The literal matrix of the normal form. Throws RangeError when a
/// parameter is outside its admissible set.
SymplecticMatrix realize(const BasicNormalForm& nf);

/// Realization of a diamond product of normal forms.
SymplecticMatrix realize(const std::vector<BasicNormalForm>& nfs);

/// Unit-circle eigenvalue data: (omega, algebraic, geometric), closed under
/// conjugation, moduli snapped to 1.
struct CircleSpectrum {
    struct Entry {
        Complex omega;
        int alg;
        int geom;
    };
    std::vector<Entry> eigenvalues;

    /// Total algebraic multiplicity on the circle.
    int total_alg() const;
};

CircleSpectrum circle_spectrum(const SymplecticMatrix& m,
                               const Tolerances& tol = {});

/// Eigenvalues whose cluster sits off the unit circle, one entry per
/// algebraic multiplicity, each replaced by its cluster mean. Complements
/// circle_spectrum: a defective circle eigenvalue computed from a slightly
/// perturbed matrix splits by the square root of the perturbation, so the
/// split pair must be judged through its cluster, never individually.
std::vector<Complex> off_circle_spectrum(const SymplecticMatrix& m,
                                         const Tolerances& tol = {});

/// Row-major JSON array-of-arrays with an "n" field; binary64 round-trip.
nlohmann::json to_json(const SymplecticMatrix& m);
SymplecticMatrix symplectic_from_json(const nlohmann::json& j,
                                      const Tolerances& tol = {});

} // namespace cchar
