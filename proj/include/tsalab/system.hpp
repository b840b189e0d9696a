#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "tsalab/keyvalue.hpp"
#include "tsalab/matlib.hpp"
#include "tsalab/rng.hpp"

namespace tsalab {

/// One draw (W_t, V_t) of the driving noise, including its mean.
struct NoiseSample {
  Vector w;
  Vector v;
};

enum class NoiseCheck {
  RequirePositiveDefinite,
  // Instances built from finitely supported samplers (TDC) may have a
  // rank-deficient noise covariance.
  AllowSemidefinite,
};

/// A linear two-time-scale problem: find (x*, y*) with
///   A_ff x* + A_fs y* = E[W],   A_sf x* + A_ss y* = E[V],
/// where Cov(W, V) = Gamma. Immutable once built by make_system.
class TwoTimeScaleSystem {
 public:
  Eigen::Index dx() const noexcept { return a_ff_.rows(); }
  Eigen::Index dy() const noexcept { return a_ss_.rows(); }
  Eigen::Index dim() const noexcept { return dx() + dy(); }

  const Matrix& a_ff() const noexcept { return a_ff_; }
  const Matrix& a_fs() const noexcept { return a_fs_; }
  const Matrix& a_sf() const noexcept { return a_sf_; }
  const Matrix& a_ss() const noexcept { return a_ss_; }
  Matrix full_a() const;

  const Matrix& gamma() const noexcept { return gamma_; }
  Matrix gamma_ff() const { return gamma_.topLeftCorner(dx(), dx()); }
  Matrix gamma_fs() const { return gamma_.topRightCorner(dx(), dy()); }
  Matrix gamma_sf() const { return gamma_.bottomLeftCorner(dy(), dx()); }
  Matrix gamma_ss() const { return gamma_.bottomRightCorner(dy(), dy()); }
  /// Symmetric square root of Gamma, used to draw Gaussian noise.
  const Matrix& gamma_sqrt() const noexcept { return gamma_sqrt_; }

  const Vector& noise_mean() const noexcept { return noise_mean_; }
  Vector mean_w() const { return noise_mean_.head(dx()); }
  Vector mean_v() const { return noise_mean_.tail(dy()); }

  const Vector& x_star() const noexcept { return x_star_; }
  const Vector& y_star() const noexcept { return y_star_; }

  /// Delta = A_ss - A_sf A_ff^{-1} A_fs
  const Matrix& delta() const noexcept { return delta_; }
  /// A_ff^{-1} A_fs; x_inf(y) = -A_ff^{-1} A_fs y in centred coordinates.
  const Matrix& a_ff_inv_a_fs() const noexcept { return a_ff_inv_a_fs_; }

  std::optional<std::uint64_t> seed() const noexcept { return seed_; }
  NoiseCheck noise_check() const noexcept { return noise_check_; }

  friend TwoTimeScaleSystem make_system(Matrix, Matrix, Matrix, Matrix, Matrix, Vector, NoiseCheck,
                                        std::optional<std::uint64_t>);

 private:
  TwoTimeScaleSystem() = default;

  Matrix a_ff_, a_fs_, a_sf_, a_ss_;
  Matrix gamma_, gamma_sqrt_;
  Vector noise_mean_;
  Vector x_star_, y_star_;
  Matrix delta_, a_ff_inv_a_fs_;
  std::optional<std::uint64_t> seed_;
  NoiseCheck noise_check_ = NoiseCheck::RequirePositiveDefinite;
};

/// Validates the blocks and solves for (x*, y*).
/// Errors: DimensionMismatch, UnstableFastBlock, UnstableSchurComplement,
/// NoiseCovarianceNotPD, SingularA.
TwoTimeScaleSystem make_system(Matrix a_ff, Matrix a_fs, Matrix a_sf, Matrix a_ss, Matrix gamma, Vector noise_mean,
                               NoiseCheck check = NoiseCheck::RequirePositiveDefinite,
                               std::optional<std::uint64_t> seed = std::nullopt);

struct SpectrumRange {
  double low = 0.5;
  double high = 2.0;
};

/// Random instance stable by construction: A_ff and the target Schur
/// complement are each "symmetric part with eigenvalues in range + skew part
/// of norm at most half the smallest eigenvalue"; A_ss is then derived as
/// Delta + A_sf A_ff^{-1} A_fs. Gamma = I and the noise mean is zero.
TwoTimeScaleSystem random_system(Eigen::Index dx, Eigen::Index dy, std::uint64_t seed, SpectrumRange range = {},
                                 bool zero_cross_blocks = false);

/// Replaces the noise covariance by Gamma_fs = 0, Gamma_ff = s I and
///   Gamma_ss = Delta Delta^T - A_sf A_ff^{-1} Gamma_ff A_ff^{-T} A_sf^T,
/// so the averaged slow iterate has unit asymptotic covariance. s is halved
/// (at most 60 times) until Gamma_ss is positive definite.
TwoTimeScaleSystem calibrate_noise_identity_pr(const TwoTimeScaleSystem& sys, double fast_noise_scale);

/// noise_mean + Gamma^{1/2} z with z standard normal.
NoiseSample sample_noise(const TwoTimeScaleSystem& sys, Rng& rng);

/// Allocation-free variant for hot loops; `scratch` is resized as needed.
void sample_noise(const TwoTimeScaleSystem& sys, Rng& rng, NoiseSample& out, Vector& scratch);

KeyValueFile system_to_keyvalue(const TwoTimeScaleSystem& sys);
TwoTimeScaleSystem system_from_keyvalue(const KeyValueFile& kv, NoiseCheck check = NoiseCheck::RequirePositiveDefinite);
void save_system(const TwoTimeScaleSystem& sys, const std::filesystem::path& path);
TwoTimeScaleSystem load_system(const std::filesystem::path& path);

}  // namespace tsalab
