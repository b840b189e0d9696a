#include "tsalab/system.hpp"

#include <cmath>
#include <string>

namespace tsalab {

Matrix TwoTimeScaleSystem::full_a() const {
  Matrix a(dim(), dim());
  a << a_ff_, a_fs_, a_sf_, a_ss_;
  return a;
}

TwoTimeScaleSystem make_system(Matrix a_ff, Matrix a_fs, Matrix a_sf, Matrix a_ss, Matrix gamma, Vector noise_mean,
                               NoiseCheck check, std::optional<std::uint64_t> seed) {
  require_square(a_ff, "A_ff");
  require_square(a_ss, "A_ss");
  const Eigen::Index dx = a_ff.rows();
  const Eigen::Index dy = a_ss.rows();
  if (a_fs.rows() != dx || a_fs.cols() != dy) throw Error(ErrorCode::DimensionMismatch, "A_fs must be dx x dy");
  if (a_sf.rows() != dy || a_sf.cols() != dx) throw Error(ErrorCode::DimensionMismatch, "A_sf must be dy x dx");
  if (gamma.rows() != dx + dy || gamma.cols() != dx + dy) {
    throw Error(ErrorCode::DimensionMismatch, "Gamma must be (dx+dy) x (dx+dy)");
  }
  if (noise_mean.size() != dx + dy) throw Error(ErrorCode::DimensionMismatch, "noise mean must have dx+dy entries");
  if (!a_ff.allFinite() || !a_fs.allFinite() || !a_sf.allFinite() || !a_ss.allFinite() || !gamma.allFinite() ||
      !noise_mean.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "system blocks must be finite");
  }

  if (!(spectral_abscissa(a_ff) > 0.0)) {
    throw Error(ErrorCode::UnstableFastBlock, "-A_ff is not Hurwitz (min Re eig(A_ff) <= 0)");
  }

  TwoTimeScaleSystem sys;
  Eigen::PartialPivLU<Matrix> ff_lu(a_ff);
  sys.a_ff_inv_a_fs_ = ff_lu.solve(a_fs);
  sys.delta_ = a_ss - a_sf * sys.a_ff_inv_a_fs_;
  if (!(spectral_abscissa(sys.delta_) > 0.0)) {
    throw Error(ErrorCode::UnstableSchurComplement, "-Delta is not Hurwitz (min Re eig(Delta) <= 0)");
  }

  if (!is_symmetric(gamma)) throw Error(ErrorCode::NoiseCovarianceNotPD, "Gamma is not symmetric");
  gamma = symmetrize(gamma);
  if (check == NoiseCheck::RequirePositiveDefinite && !is_positive_definite(gamma)) {
    throw Error(ErrorCode::NoiseCovarianceNotPD, "Gamma is not positive definite");
  }
  try {
    sys.gamma_sqrt_ = spd_sqrt(gamma);
  } catch (const Error&) {
    throw Error(ErrorCode::NoiseCovarianceNotPD, "Gamma has a negative eigenvalue");
  }

  sys.a_ff_ = std::move(a_ff);
  sys.a_fs_ = std::move(a_fs);
  sys.a_sf_ = std::move(a_sf);
  sys.a_ss_ = std::move(a_ss);
  sys.gamma_ = std::move(gamma);
  sys.noise_mean_ = std::move(noise_mean);
  sys.seed_ = seed;
  sys.noise_check_ = check;

  const Matrix a = sys.full_a();
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularA, "block matrix A is numerically singular");
  Vector z = lu.solve(sys.noise_mean_);
  z += lu.solve(Vector(sys.noise_mean_ - a * z));
  const double residual = (a * z - sys.noise_mean_).norm();
  if (!(residual <= 1e-10 * std::max(1.0, sys.noise_mean_.norm()) * std::max(1.0, a.norm()))) {
    throw Error(ErrorCode::SingularA, "solution residual too large: " + std::to_string(residual));
  }
  sys.x_star_ = z.head(dx);
  sys.y_star_ = z.tail(dy);
  return sys;
}

namespace {

Matrix random_orthogonal(Eigen::Index n, Rng& rng) {
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign fix so Q is Haar distributed.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

// Symmetric part with spectrum in [low, high] plus a skew part whose
// spectral norm is at most half the smallest symmetric eigenvalue.
Matrix random_stable_block(Eigen::Index n, const SpectrumRange& range, Rng& rng) {
  Vector eig(n);
  for (Eigen::Index i = 0; i < n; ++i) eig(i) = range.low + (range.high - range.low) * rng.uniform();
  const Matrix q = random_orthogonal(n, rng);
  const Matrix sym = q * eig.asDiagonal() * q.transpose();

  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Matrix skew = g - g.transpose();
  const double skew_norm = spectral_norm(skew);
  const double target = 0.5 * eig.minCoeff() * rng.uniform();
  if (skew_norm > 0.0) skew *= target / skew_norm;
  else skew.setZero();
  return symmetrize(sym) + skew;
}

Matrix random_unit_norm(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = 2.0 * rng.uniform() - 1.0;
  const double norm = spectral_norm(m);
  if (norm > 0.0) m /= norm;
  return m;
}

}  // namespace

TwoTimeScaleSystem random_system(Eigen::Index dx, Eigen::Index dy, std::uint64_t seed, SpectrumRange range,
                                 bool zero_cross_blocks) {
  if (dx < 1 || dy < 1) throw Error(ErrorCode::InvalidArgument, "random_system: dx and dy must be >= 1");
  if (!(range.low > 0.0) || !(range.low <= range.high) || !std::isfinite(range.high)) {
    throw Error(ErrorCode::InvalidArgument, "random_system: spectrum range must satisfy 0 < low <= high");
  }
  Rng rng(seed);
  const Matrix a_ff = random_stable_block(dx, range, rng);
  const Matrix delta = random_stable_block(dy, range, rng);
  Matrix a_fs = random_unit_norm(dx, dy, rng);
  Matrix a_sf = random_unit_norm(dy, dx, rng);
  if (zero_cross_blocks) {
    a_fs.setZero();
    a_sf.setZero();
  }
  const Matrix a_ss = delta + a_sf * a_ff.partialPivLu().solve(a_fs);
  const Eigen::Index d = dx + dy;
  return make_system(a_ff, a_fs, a_sf, a_ss, Matrix::Identity(d, d), Vector::Zero(d),
                     NoiseCheck::RequirePositiveDefinite, seed);
}

TwoTimeScaleSystem calibrate_noise_identity_pr(const TwoTimeScaleSystem& sys, double fast_noise_scale) {
  if (!(fast_noise_scale > 0.0) || !std::isfinite(fast_noise_scale)) {
    throw Error(ErrorCode::InvalidArgument, "calibrate_noise_identity_pr: fast_noise_scale must be > 0");
  }
  const Eigen::Index dx = sys.dx();
  const Eigen::Index dy = sys.dy();
  // K = A_sf A_ff^{-1}; the cross term is K Gamma_ff K^T.
  const Matrix k = sys.a_ff().transpose().partialPivLu().solve(sys.a_sf().transpose()).transpose();
  const Matrix target = sys.delta() * sys.delta().transpose();
  const Matrix kkt = k * k.transpose();

  double scale = fast_noise_scale;
  for (int halvings = 0; halvings <= 60; ++halvings, scale *= 0.5) {
    const Matrix gamma_ss = symmetrize(target - scale * kkt);
    if (!is_positive_definite(gamma_ss)) continue;
    Matrix gamma = Matrix::Zero(dx + dy, dx + dy);
    gamma.topLeftCorner(dx, dx) = scale * Matrix::Identity(dx, dx);
    gamma.bottomRightCorner(dy, dy) = gamma_ss;
    return make_system(sys.a_ff(), sys.a_fs(), sys.a_sf(), sys.a_ss(), gamma, sys.noise_mean(),
                       NoiseCheck::RequirePositiveDefinite, sys.seed());
  }
  throw Error(ErrorCode::CalibrationFailed, "Gamma_ss not positive definite after 60 halvings of the fast scale");
}

void sample_noise(const TwoTimeScaleSystem& sys, Rng& rng, NoiseSample& out, Vector& scratch) {
  const Eigen::Index d = sys.dim();
  scratch.resize(d);
  rng.fill_normal(std::span<double>(scratch.data(), static_cast<std::size_t>(d)));
  out.w.resize(sys.dx());
  out.v.resize(sys.dy());
  const Matrix& s = sys.gamma_sqrt();
  out.w.noalias() = s.topRows(sys.dx()) * scratch;
  out.v.noalias() = s.bottomRows(sys.dy()) * scratch;
  out.w += sys.noise_mean().head(sys.dx());
  out.v += sys.noise_mean().tail(sys.dy());
}

NoiseSample sample_noise(const TwoTimeScaleSystem& sys, Rng& rng) {
  NoiseSample out;
  Vector scratch;
  sample_noise(sys, rng, out, scratch);
  return out;
}

KeyValueFile system_to_keyvalue(const TwoTimeScaleSystem& sys) {
  KeyValueFile kv;
  kv.set("format", "tsalab-system-1");
  kv.set("dx", std::to_string(sys.dx()));
  kv.set("dy", std::to_string(sys.dy()));
  if (sys.seed()) kv.set("seed", std::to_string(*sys.seed()));
  if (sys.noise_check() == NoiseCheck::AllowSemidefinite) kv.set("noise_semidefinite", "true");
  kv.set_matrix("A_ff", sys.a_ff());
  kv.set_matrix("A_fs", sys.a_fs());
  kv.set_matrix("A_sf", sys.a_sf());
  kv.set_matrix("A_ss", sys.a_ss());
  kv.set_matrix("Gamma", sys.gamma());
  kv.set_vector("noise_mean", sys.noise_mean());
  return kv;
}

TwoTimeScaleSystem system_from_keyvalue(const KeyValueFile& kv, NoiseCheck check) {
  const auto dx = kv.get_int("dx");
  const auto dy = kv.get_int("dy");
  if (dx < 1 || dy < 1) throw Error(ErrorCode::ParseError, "dx and dy must be >= 1");
  std::optional<std::uint64_t> seed;
  if (kv.has("seed")) seed = kv.get_uint64_or("seed", 0);
  return make_system(kv.get_matrix("A_ff", dx, dx), kv.get_matrix("A_fs", dx, dy), kv.get_matrix("A_sf", dy, dx),
                     kv.get_matrix("A_ss", dy, dy), kv.get_matrix("Gamma", dx + dy, dx + dy),
                     kv.get_vector("noise_mean", dx + dy), check, seed);
}

void save_system(const TwoTimeScaleSystem& sys, const std::filesystem::path& path) {
  system_to_keyvalue(sys).save(path);
}

TwoTimeScaleSystem load_system(const std::filesystem::path& path) {
  const auto kv = KeyValueFile::load(path);
  const bool psd = kv.get_bool_or("noise_semidefinite", false);
  return system_from_keyvalue(kv, psd ? NoiseCheck::AllowSemidefinite : NoiseCheck::RequirePositiveDefinite);
}

}  // namespace tsalab
