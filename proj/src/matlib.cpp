#include "tsalab/matlib.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace tsalab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularPencil: return "SingularPencil";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::UnstableFastBlock: return "UnstableFastBlock";
    case ErrorCode::UnstableSchurComplement: return "UnstableSchurComplement";
    case ErrorCode::NoiseCovarianceNotPD: return "NoiseCovarianceNotPD";
    case ErrorCode::SingularA: return "SingularA";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidTime: return "InvalidTime";
    case ErrorCode::OutsideTheta: return "OutsideTheta";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::SingularUpdate: return "SingularUpdate";
    case ErrorCode::DiagnosticsDisabled: return "DiagnosticsDisabled";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficientFeatures: return "RankDeficientFeatures";
    case ErrorCode::NoStationaryDistribution: return "NoStationaryDistribution";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " must be square and non-empty, got " + std::to_string(m.rows()) +
                    "x" + std::to_string(m.cols()));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": shape mismatch");
  }
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).norm() <= rel_tol * std::max(1.0, m.norm());
}

bool is_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
  require_square(m_, "SpdMatrix");
  if (!m_.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "non-finite entries");
  if (!is_symmetric(m_)) throw Error(ErrorCode::NotPositiveDefinite, "matrix is not symmetric");
  if (!is_positive_definite(m_)) throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
}

namespace {

// vec is column-major: vec(A X + X B) = (I_n (x) A + B^T (x) I_m) vec(X).
Matrix kronecker_sum(const Matrix& a, const Matrix& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = b.rows();
  Matrix k = Matrix::Zero(m * n, m * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k.block(j * m, j * m, m, m) += a;
    for (Eigen::Index l = 0; l < n; ++l) {
      const double blj = b(l, j);
      if (blj == 0.0) continue;
      for (Eigen::Index i = 0; i < m; ++i) k(j * m + i, l * m + i) += blj;
    }
  }
  return k;
}

}  // namespace

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& q) {
  require_square(a, "solve_sylvester: A");
  require_square(b, "solve_sylvester: B");
  if (q.rows() != a.rows() || q.cols() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_sylvester: Q must be rows(A) x rows(B)");
  }
  const Eigen::Index m = a.rows();
  const Eigen::Index n = b.rows();

  const Matrix k = kronecker_sum(a, b);
  Eigen::PartialPivLU<Matrix> lu(k);
  const double rcond = lu.rcond();
  // The rcond estimator can miss exact zero pivots, so the pivots are checked too.
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double pivot_floor = 1e-14 * std::max(1.0, pivots.maxCoeff());
  if (!(rcond > 1e-14) || !(pivots.minCoeff() > pivot_floor)) {
    throw Error(ErrorCode::SingularPencil,
                "Kronecker system is numerically singular (rcond=" + std::to_string(rcond) + ")");
  }

  const Eigen::Map<const Vector> rhs(q.data(), m * n);
  Vector x = lu.solve(rhs);
  // One step of iterative refinement.
  const Vector r = rhs - k * x;
  x += lu.solve(r);

  return Eigen::Map<const Matrix>(x.data(), m, n);
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  require_square(a, "solve_lyapunov: A");
  require_same_shape(a, q, "solve_lyapunov: Q");
  return symmetrize(solve_sylvester(a, a.transpose(), q));
}

namespace {

struct SymEigen {
  Vector values;
  Matrix vectors;
};

SymEigen symmetric_eigen(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "symmetric eigendecomposition failed");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

// Returns {P^{1/2}, P^{-1/2}} for an already validated SPD matrix.
std::pair<Matrix, Matrix> sqrt_and_inverse_sqrt(const Matrix& p) {
  const SymEigen e = symmetric_eigen(p);
  const Vector root = e.values.cwiseMax(0.0).cwiseSqrt();
  return {e.vectors * root.asDiagonal() * e.vectors.transpose(),
          e.vectors * root.cwiseInverse().asDiagonal() * e.vectors.transpose()};
}

}  // namespace

Matrix spd_sqrt(const Matrix& p) {
  require_square(p, "spd_sqrt");
  if (!is_symmetric(p)) throw Error(ErrorCode::NotPositiveDefinite, "spd_sqrt: matrix is not symmetric");
  const SymEigen e = symmetric_eigen(p);
  const double lmax = e.values.maxCoeff();
  if (!(lmax > 0.0)) {
    if (lmax == 0.0 && e.values.minCoeff() == 0.0) return Matrix::Zero(p.rows(), p.cols());
    throw Error(ErrorCode::NotPositiveDefinite, "spd_sqrt: no positive eigenvalue");
  }
  if (e.values.minCoeff() < -1e-10 * lmax) {
    throw Error(ErrorCode::NotPositiveDefinite, "spd_sqrt: negative eigenvalue");
  }
  const Vector root = e.values.cwiseMax(1e-14 * lmax).cwiseSqrt();
  return symmetrize(e.vectors * root.asDiagonal() * e.vectors.transpose());
}

Matrix spd_sqrt(const SpdMatrix& p) { return spd_sqrt(p.matrix()); }

Matrix psd_sqrt(const Matrix& p, double scale) {
  require_square(p, "psd_sqrt");
  if (!is_symmetric(p)) throw Error(ErrorCode::NotPositiveDefinite, "psd_sqrt: matrix is not symmetric");
  if (p.size() == 0) return p;
  const SymEigen e = symmetric_eigen(p);
  const double ref = std::max(scale, std::abs(e.values.maxCoeff()));
  const double tol = 1e-10 * ref;
  if (e.values.minCoeff() < -tol) throw Error(ErrorCode::NotPositiveDefinite, "psd_sqrt: negative eigenvalue");
  const Vector root = e.values.unaryExpr([tol](double v) { return v <= tol ? 0.0 : std::sqrt(v); });
  return symmetrize(e.vectors * root.asDiagonal() * e.vectors.transpose());
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

double weighted_norm(const Matrix& a, const SpdMatrix& p) {
  require_square(a, "weighted_norm: A");
  if (a.rows() != p.size()) throw Error(ErrorCode::DimensionMismatch, "weighted_norm: A and P differ in size");
  const auto [root, inv_root] = sqrt_and_inverse_sqrt(p.matrix());
  return spectral_norm(root * a * inv_root);
}

double cross_weighted_norm(const Matrix& c, const SpdMatrix& p_left, const SpdMatrix& p_right) {
  if (c.cols() != p_left.size() || c.rows() != p_right.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cross_weighted_norm: weights not conformable with C");
  }
  const Matrix right_root = sqrt_and_inverse_sqrt(p_right.matrix()).first;
  const Matrix left_inv_root = sqrt_and_inverse_sqrt(p_left.matrix()).second;
  return spectral_norm(right_root * c * left_inv_root);
}

SymmetricExtremes symmetric_extremes(const Matrix& s) {
  require_square(s, "symmetric_extremes");
  const SymEigen e = symmetric_eigen(s);
  return {e.values.minCoeff(), e.values.maxCoeff()};
}

std::vector<std::complex<double>> eigenvalues(const Matrix& input) {
  require_square(input, "eigenvalues");
  const int n = static_cast<int>(input.rows());
  if (!input.allFinite()) throw Error(ErrorCode::ConvergenceFailure, "eigenvalues: non-finite input");

  // Francis double-shift QR on the upper Hessenberg form, following the
  // classical EISPACK hqr layout. Indices below are 1-based to keep the
  // bookkeeping identical to that formulation.
  Matrix h0 = input;
  if (n > 2) {
    Eigen::HessenbergDecomposition<Matrix> hd(input);
    h0 = hd.matrixH();
  }
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a.block(1, 1, n, n) = h0;
  std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);

  constexpr int kSweepBudget = 10000;
  int total_sweeps = 0;

  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

  int nn = n;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (++total_sweeps > kSweepBudget) {
            throw Error(ErrorCode::ConvergenceFailure, "eigenvalues: QR sweep budget exhausted");
          }
          // Exceptional shifts break cycles that the standard shift can fall into.
          if (its > 0 && its % 10 == 0) {
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - r - s;
            r = a(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = std::copysign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<std::complex<double>> out;
  out.reserve(n);
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

double spectral_abscissa(const Matrix& a) {
  const auto ev = eigenvalues(a);
  double lo = ev.front().real();
  for (const auto& e : ev) lo = std::min(lo, e.real());
  return lo;
}

}  // namespace tsalab
