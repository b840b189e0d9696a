#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "tsalab/error.hpp"

namespace tsalab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A symmetric positive definite matrix. Construction validates symmetry
/// (1e-12 relative) and definiteness (Cholesky), so functions taking an
/// SpdMatrix never re-check.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix m);

  const Matrix& matrix() const noexcept { return m_; }
  Eigen::Index size() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
};

/// Solves A X + X A^T = Q for symmetric Q. The Kronecker-vectorized system
/// (I (x) A + A (x) I) vec(X) = vec(Q) is solved directly with partial
/// pivoting, which is adequate for the dimensions used here (d <= 64).
/// Throws SingularPencil when the relative condition exceeds 1e14.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Solves A X + X B = Q (A is m x m, B is n x n, Q is m x n).
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& q);

/// Symmetric square root S with S S = P. Eigenvalues below 1e-14 lambda_max
/// are clamped; anything below -1e-10 lambda_max raises NotPositiveDefinite.
Matrix spd_sqrt(const Matrix& p);
Matrix spd_sqrt(const SpdMatrix& p);
// Square root of a covariance that may be singular. Eigenvalues within 1e-10 * max(scale, lambda_max)
// of zero are treated as zero; anything more negative throws NotPositiveDefinite.
Matrix psd_sqrt(const Matrix& p, double scale = 0.0);

/// ||A||_P = sup x^T A^T P A x / x^T P x, i.e. the spectral norm of
/// P^{1/2} A P^{-1/2}.
double weighted_norm(const Matrix& a, const SpdMatrix& p);

/// Spectral norm of P_right^{1/2} C P_left^{-1/2}, where C maps the space
/// weighted by P_left into the space weighted by P_right.
double cross_weighted_norm(const Matrix& c, const SpdMatrix& p_left, const SpdMatrix& p_right);

double spectral_norm(const Matrix& a);

/// Eigenvalues of a general real matrix via Hessenberg reduction and
/// shifted QR sweeps (10,000-sweep budget, ConvergenceFailure beyond it).
std::vector<std::complex<double>> eigenvalues(const Matrix& a);

/// Smallest real part over the spectrum of A.
double spectral_abscissa(const Matrix& a);

struct SymmetricExtremes {
  double min;
  double max;
};

/// Extreme eigenvalues of a symmetric matrix.
SymmetricExtremes symmetric_extremes(const Matrix& s);

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);
bool is_positive_definite(const Matrix& m);

/// (M + M^T) / 2
Matrix symmetrize(const Matrix& m);

/// Relative residual scale used throughout: max(1, ||M||_F).
inline double residual_scale(const Matrix& m) { return std::max(1.0, m.norm()); }

void require_square(const Matrix& m, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace tsalab
