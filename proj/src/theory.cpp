#include "tsalab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "tsalab/rng.hpp"

namespace tsalab {

namespace {

double rel_residual(const Matrix& lhs, const Matrix& rhs) { return (lhs - rhs).norm() / residual_scale(rhs); }

Matrix checked_inverse(const Matrix& m, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularA, std::string(what) + " is numerically singular");
  return lu.inverse();
}

// Minimises f on (lo, hi) by golden-section search.
double golden_section(const std::function<double(double)>& f, double lo, double hi, int iterations = 80) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - r * (hi - lo);
  double d = lo + r * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations && hi - lo > 1e-12; ++i) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace

ContractionCheck check_contraction(const Matrix& a, const Matrix& p, double mu) {
  require_square(a, "A");
  require_same_shape(a, p, "P");
  const SpdMatrix pw(p);
  ContractionCheck out;
  out.alpha_max = 1.0 / spectral_norm(a);
  const int points = 20;
  const double lo = std::log(1e-6);
  const double hi = std::log(std::max(out.alpha_max, 1e-6));
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  bool all_pass = true;
  for (int i = 0; i < points; ++i) {
    const double alpha = std::exp(lo + (hi - lo) * i / (points - 1));
    const double lhs = weighted_norm(id - 2.0 * alpha * a, pw);
    const double rhs = 1.0 - 0.5 * mu * alpha;
    out.grid.push_back(alpha);
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    if (all_pass && lhs <= rhs) out.threshold = alpha;
    else all_pass = false;
  }
  return out;
}

CovariancePack compute_pack(const TwoTimeScaleSystem& sys) {
  const Eigen::Index dx = sys.dx();
  const Eigen::Index dy = sys.dy();
  CovariancePack pk;
  const Matrix a_ss_inv = checked_inverse(sys.a_ss(), "A_ss");
  const Matrix a_ff_inv = checked_inverse(sys.a_ff(), "A_ff");
  pk.Delta = sys.delta();
  pk.G = sys.a_ff() - sys.a_fs() * a_ss_inv * sys.a_sf();

  pk.P_ff = solve_lyapunov(sys.a_ff(), Matrix::Identity(dx, dx));
  pk.P_Delta = solve_lyapunov(pk.Delta, Matrix::Identity(dy, dy));
  pk.mu_ff = 1.0 / symmetric_extremes(pk.P_ff).max;
  pk.mu_Delta = 1.0 / symmetric_extremes(pk.P_Delta).max;
  pk.contraction_ff = check_contraction(sys.a_ff(), pk.P_ff, pk.mu_ff);
  pk.contraction_Delta = check_contraction(pk.Delta, pk.P_Delta, pk.mu_Delta);

  const Matrix g_ff = sys.gamma_ff();
  const Matrix g_fs = sys.gamma_fs();
  const Matrix g_ss = sys.gamma_ss();
  pk.Sigma_ff = solve_lyapunov(sys.a_ff(), g_ff);
  pk.Sigma_fs = sys.a_ff().partialPivLu().solve(Matrix(g_fs - pk.Sigma_ff * sys.a_sf().transpose()));
  const Matrix cross = sys.a_sf() * pk.Sigma_fs;
  pk.Sigma_ss = solve_lyapunov(pk.Delta, symmetrize(g_ss - cross - cross.transpose()));

  // Noise combinations seen by each averaged iterate.
  Matrix c_fast(dx, dx + dy), c_slow(dy, dx + dy);
  c_fast << Matrix::Identity(dx, dx), -sys.a_fs() * a_ss_inv;
  c_slow << -sys.a_sf() * a_ff_inv, Matrix::Identity(dy, dy);
  pk.Gamma_tilde_ff = symmetrize(c_fast * sys.gamma() * c_fast.transpose());
  pk.Gamma_tilde_ss = symmetrize(c_slow * sys.gamma() * c_slow.transpose());
  const Matrix g_inv = checked_inverse(pk.G, "G");
  const Matrix d_inv = checked_inverse(pk.Delta, "Delta");
  pk.Sigma_bar_ff = symmetrize(g_inv * pk.Gamma_tilde_ff * g_inv.transpose());
  pk.Sigma_bar_ss = symmetrize(d_inv * pk.Gamma_tilde_ss * d_inv.transpose());

  const Matrix a = sys.full_a();
  Eigen::PartialPivLU<Matrix> a_lu(a);
  const Matrix a_inv_gamma = a_lu.solve(sys.gamma());
  pk.Sigma_star = symmetrize(a_lu.solve(Matrix(a_inv_gamma.transpose())));

  auto& r = pk.residuals;
  r.lyap_ff = rel_residual(sys.a_ff() * pk.P_ff + pk.P_ff * sys.a_ff().transpose(), Matrix::Identity(dx, dx));
  r.lyap_delta = rel_residual(pk.Delta * pk.P_Delta + pk.P_Delta * pk.Delta.transpose(), Matrix::Identity(dy, dy));
  r.sigma_ff = rel_residual(sys.a_ff() * pk.Sigma_ff + pk.Sigma_ff * sys.a_ff().transpose(), g_ff);
  r.sigma_fs = rel_residual(sys.a_ff() * pk.Sigma_fs + pk.Sigma_ff * sys.a_sf().transpose(), g_fs);
  r.sigma_ss = rel_residual(pk.Delta * pk.Sigma_ss + pk.Sigma_ss * pk.Delta.transpose() + cross + cross.transpose(),
                            g_ss);
  r.sigma_bar_ff = rel_residual(pk.G * pk.Sigma_bar_ff * pk.G.transpose(), pk.Gamma_tilde_ff);
  r.sigma_bar_ss = rel_residual(pk.Delta * pk.Sigma_bar_ss * pk.Delta.transpose(), pk.Gamma_tilde_ss);
  r.sigma_star = rel_residual(a * pk.Sigma_star * a.transpose(), sys.gamma());
  return pk;
}

RateReport err_rates(const StepSizes& s, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidTime, "err_rates: n must be >= 1");
  const double nd = static_cast<double>(n);
  const double ratio = s.gamma / s.alpha;
  RateReport r;
  r.err_x = s.gamma * (1.0 + ratio + 1.0 / (nd * s.gamma));
  r.err_xy = ratio * (1.0 / nd + (s.alpha + s.gamma) * (s.alpha + s.gamma) + s.gamma);
  r.err_y = 1.0 / nd + s.gamma * s.gamma / s.alpha;
  r.at_n = n;
  return r;
}

RateReport err_rates(const StepSchedule& sched, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidTime, "err_rates: n must be >= 1");
  RateReport r = err_rates(sched.at(n), n);
  r.schedule_echo = sched.describe();
  return r;
}

double theorem1_bound(double a, double b, std::uint64_t n, double c) {
  if (!in_theta_region(a, b)) {
    throw Error(ErrorCode::OutsideTheta, "(a, b) must satisfy 1/2 < a < b < 2a - 1/2");
  }
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "theorem1_bound: C must be > 0");
  if (n == 0) throw Error(ErrorCode::InvalidTime, "theorem1_bound: n must be >= 1");
  const double nd = static_cast<double>(n);
  const double e3 = 2.0 * a - b - 0.5;
  const double terms = std::pow(nd, a - 0.5) / (a - 0.5) + 1.0 / (b - a) + std::pow(nd, 0.5 * b) +
                       std::pow(nd, e3) / e3;
  return c * terms / std::sqrt(nd);
}

Theorem1Optimum optimize_theorem1(std::uint64_t n, double c) {
  if (n < 10) throw Error(ErrorCode::InvalidArgument, "optimize_theorem1: n must be >= 10");
  Theorem1Optimum best{0, 0, std::numeric_limits<double>::infinity()};
  const double h = 1e-3;
  for (int i = 501; i < 1000; ++i) {
    const double a = i * h;
    for (int j = i + 1; j < 1000; ++j) {
      const double b = j * h;
      if (!in_theta_region(a, b)) break;
      const double v = theorem1_bound(a, b, n, c);
      if (v < best.bound) best = {a, b, v};
    }
  }
  // Coordinate-wise refinement inside the open region.
  const double eps = 1e-12;
  for (int round = 0; round < 4; ++round) {
    const double b = best.b;
    const double a_lo = std::max(0.5, 0.5 * (b + 0.5)) + eps;
    const double a_hi = b - eps;
    if (a_lo < a_hi) {
      const double a = golden_section([&](double x) { return theorem1_bound(x, b, n, c); }, a_lo, a_hi);
      const double v = theorem1_bound(a, b, n, c);
      if (v < best.bound) best = {a, b, v};
    }
    const double a = best.a;
    const double b_lo = a + eps;
    const double b_hi = std::min(2.0 * a - 0.5, 1.0) - eps;
    if (b_lo < b_hi) {
      const double bb = golden_section([&](double x) { return theorem1_bound(a, x, n, c); }, b_lo, b_hi);
      const double v = theorem1_bound(a, bb, n, c);
      if (v < best.bound) best = {a, bb, v};
    }
  }
  return best;
}

NormExpectation expected_gaussian_norm(const Matrix& cov, std::uint64_t draws, std::uint64_t seed, double scale) {
  require_square(cov, "covariance");
  if (draws < 2) throw Error(ErrorCode::InvalidArgument, "expected_gaussian_norm: need at least 2 draws");
  const Matrix s = psd_sqrt(cov, scale);
  Rng rng(seed);
  Vector z(cov.rows()), y(cov.rows());
  double mean = 0, m2 = 0;
  for (std::uint64_t k = 1; k <= draws; ++k) {
    rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    y.noalias() = s * z;
    const double v = y.norm();
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(draws - 1);
  return {mean, std::sqrt(var / static_cast<double>(draws))};
}

Corollary1Targets corollary1_targets(const CovariancePack& pack, std::uint64_t draws, std::uint64_t seed) {
  const double scale = std::max(spectral_norm(pack.Gamma_tilde_ff), spectral_norm(pack.Gamma_tilde_ss));
  return {expected_gaussian_norm(pack.Gamma_tilde_ff, draws, derive_seed(seed, 1), scale),
          expected_gaussian_norm(pack.Gamma_tilde_ss, draws, derive_seed(seed, 2), scale)};
}

LowerBound lower_bound(std::uint64_t d, std::uint64_t n, const SpdMatrix& sigma) {
  if (d == 0 || n == 0) throw Error(ErrorCode::InvalidArgument, "lower_bound: d and n must be >= 1");
  const auto ext = symmetric_extremes(sigma.matrix());
  const double norm = ext.max;
  const double kappa = ext.max / ext.min;
  const double nd = static_cast<double>(n);
  LowerBound lb;
  lb.kappa = kappa;
  if (static_cast<double>(d) > 48.0 * std::log(2.0)) {
    lb.regime = "fano";
    lb.value = std::sqrt(static_cast<double>(d) * norm / (128.0 * nd * kappa)) / 3.0;
  } else {
    lb.regime = "lecam";
    const double factor = std::max(1.0 - 1.0 / std::sqrt(kappa), 0.5 * std::exp(-1.0 / kappa));
    lb.value = 0.5 * std::sqrt(norm / (nd * kappa)) * factor;
  }
  return lb;
}

namespace {

Matrix gamma_tilde(const CovariancePack& pack, const TwoTimeScaleSystem& sys) {
  const Eigen::Index dx = sys.dx();
  const Eigen::Index dy = sys.dy();
  const Matrix a = sys.full_a();
  Matrix d = Matrix::Zero(dx + dy, dx + dy);
  d.topLeftCorner(dx, dx) = pack.G;
  d.bottomRightCorner(dy, dy) = pack.Delta;
  // D A^{-1} Gamma A^{-T} D^T, computed from a QR factorisation of A.
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  const Matrix a_inv_gamma = qr.solve(sys.gamma());
  const Matrix sigma = qr.solve(a_inv_gamma.transpose());  // A^{-1} Gamma A^{-T}
  return symmetrize(d * sigma * d.transpose());
}

Matrix oracle_block(const Matrix& m, const Matrix& q, const Matrix& g_tilde) {
  const Eigen::Index k = m.rows();
  const Matrix shifted = q * m - 0.5 * Matrix::Identity(k, k);
  return solve_lyapunov(shifted, symmetrize(q * g_tilde * q.transpose()));
}

}  // namespace

OracleCovariance oracle_covariance(const CovariancePack& pack, const TwoTimeScaleSystem& sys) {
  const Matrix gt = gamma_tilde(pack, sys);
  const Eigen::Index dx = sys.dx();
  const Eigen::Index dy = sys.dy();
  OracleCovariance out;
  out.Sigma_ff_star = oracle_block(pack.G, checked_inverse(pack.G, "G"), gt.topLeftCorner(dx, dx));
  out.Sigma_ss_star = oracle_block(pack.Delta, checked_inverse(pack.Delta, "Delta"), gt.bottomRightCorner(dy, dy));
  return out;
}

Matrix oracle_slow_covariance_with_gain(const CovariancePack& pack, const TwoTimeScaleSystem& sys, const Matrix& q) {
  require_same_shape(q, pack.Delta, "gain");
  const Matrix gt = gamma_tilde(pack, sys);
  return oracle_block(pack.Delta, q, gt.bottomRightCorner(sys.dy(), sys.dy()));
}

Lemma1Deviation lemma1_deviation(const Matrix& m_x_tilde, const Matrix& m_y_hat, const Matrix& m_x_hat,
                                 const CovariancePack& pack, const StepSchedule& sched, std::uint64_t n) {
  require_same_shape(m_x_tilde, pack.Sigma_ff, "E[x~ x~^T]");
  require_same_shape(m_x_hat, pack.Sigma_ff, "E[x^ x^^T]");
  require_same_shape(m_y_hat, pack.Sigma_ss, "E[y^ y^^T]");
  const auto s = sched.at(n);
  const SpdMatrix p_ff = pack.p_ff();
  const SpdMatrix p_d = pack.p_delta();
  Lemma1Deviation out;
  out.delta_x_tilde = weighted_norm(m_x_tilde - s.alpha * pack.Sigma_ff, p_ff);
  out.delta_y = weighted_norm(m_y_hat - s.gamma * pack.Sigma_ss, p_d);
  out.delta_x = weighted_norm(m_x_hat - s.alpha * pack.Sigma_ff, p_ff);
  return out;
}

double martingale_clt_shape(const TwoTimeScaleSystem& sys, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidTime, "n must be >= 1");
  return static_cast<double>(sys.dim()) * spectral_norm(sys.gamma_sqrt()) * std::pow(static_cast<double>(n), -0.25);
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

nlohmann::json contraction_to_json(const ContractionCheck& c) {
  return {{"alpha_max", c.alpha_max}, {"alpha_threshold", c.threshold}, {"grid", c.grid}, {"lhs", c.lhs},
          {"rhs", c.rhs}};
}

}  // namespace

nlohmann::json pack_to_json(const CovariancePack& p) {
  nlohmann::json j;
  j["G"] = matrix_to_json(p.G);
  j["Delta"] = matrix_to_json(p.Delta);
  j["P_ff"] = matrix_to_json(p.P_ff);
  j["P_Delta"] = matrix_to_json(p.P_Delta);
  j["mu_ff"] = p.mu_ff;
  j["mu_Delta"] = p.mu_Delta;
  j["contraction_ff"] = contraction_to_json(p.contraction_ff);
  j["contraction_Delta"] = contraction_to_json(p.contraction_Delta);
  j["Sigma_ff"] = matrix_to_json(p.Sigma_ff);
  j["Sigma_fs"] = matrix_to_json(p.Sigma_fs);
  j["Sigma_ss"] = matrix_to_json(p.Sigma_ss);
  j["Sigma_bar_ff"] = matrix_to_json(p.Sigma_bar_ff);
  j["Sigma_bar_ss"] = matrix_to_json(p.Sigma_bar_ss);
  j["Sigma_star"] = matrix_to_json(p.Sigma_star);
  j["Gamma_tilde_ff"] = matrix_to_json(p.Gamma_tilde_ff);
  j["Gamma_tilde_ss"] = matrix_to_json(p.Gamma_tilde_ss);
  const auto& r = p.residuals;
  j["residuals"] = {{"lyap_ff", r.lyap_ff},           {"lyap_delta", r.lyap_delta},
                    {"sigma_ff", r.sigma_ff},         {"sigma_fs", r.sigma_fs},
                    {"sigma_ss", r.sigma_ss},         {"sigma_bar_ff", r.sigma_bar_ff},
                    {"sigma_bar_ss", r.sigma_bar_ss}, {"sigma_star", r.sigma_star}};
  return j;
}

}  // namespace tsalab
