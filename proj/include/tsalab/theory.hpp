#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "tsalab/matlib.hpp"
#include "tsalab/schedule.hpp"
#include "tsalab/system.hpp"

namespace tsalab {

struct PackResiduals {
  double lyap_ff = 0;       // A_ff P_ff + P_ff A_ff^T - I
  double lyap_delta = 0;    // Delta P_Delta + P_Delta Delta^T - I
  double sigma_ff = 0;      // A_ff S_ff + S_ff A_ff^T - Gamma_ff
  double sigma_fs = 0;      // A_ff S_fs + S_ff A_sf^T - Gamma_fs
  double sigma_ss = 0;      // Delta S_ss + S_ss Delta^T + A_sf S_fs + S_fs^T A_sf^T - Gamma_ss
  double sigma_bar_ff = 0;  // G Sbar_ff G^T - Cov(W - A_fs A_ss^{-1} V)
  double sigma_bar_ss = 0;  // Delta Sbar_ss Delta^T - Cov(V - A_sf A_ff^{-1} W)
  double sigma_star = 0;    // A Sstar A^T - Gamma
};

/// Certification of ||I - 2 alpha A||_P <= 1 - (mu/2) alpha on a 20-point
/// logarithmic grid of alpha in [1e-6, alpha_max]. `threshold` is the largest
/// grid point below which every grid point passes (0 if the first fails).
struct ContractionCheck {
  double alpha_max = 0;
  double threshold = 0;
  std::vector<double> grid;
  std::vector<double> lhs;
  std::vector<double> rhs;
};

/// All closed-form covariance objects of a system. Each residual is relative
/// to max(1, ||right-hand side||_F).
struct CovariancePack {
  Matrix G;        // A_ff - A_fs A_ss^{-1} A_sf
  Matrix Delta;    // A_ss - A_sf A_ff^{-1} A_fs
  Matrix P_ff;     // A_ff P + P A_ff^T = I
  Matrix P_Delta;  // Delta P + P Delta^T = I
  double mu_ff = 0;     // 1 / lambda_max(P_ff)
  double mu_Delta = 0;  // 1 / lambda_max(P_Delta)
  ContractionCheck contraction_ff;
  ContractionCheck contraction_Delta;
  Matrix Sigma_ff, Sigma_fs, Sigma_ss;  // last-iterate covariances
  Matrix Sigma_bar_ff, Sigma_bar_ss;    // averaged-iterate covariances
  Matrix Sigma_star;                    // A^{-1} Gamma A^{-T}
  Matrix Gamma_tilde_ff;                // Cov(W - A_fs A_ss^{-1} V)
  Matrix Gamma_tilde_ss;                // Cov(V - A_sf A_ff^{-1} W)
  PackResiduals residuals;

  SpdMatrix p_ff() const { return SpdMatrix(P_ff); }
  SpdMatrix p_delta() const { return SpdMatrix(P_Delta); }
  /// Limit covariance of sqrt(n) G (xbar_n - x*) and sqrt(n) Delta (ybar_n - y*).
  const Matrix& pr_limit_fast() const noexcept { return Gamma_tilde_ff; }
  const Matrix& pr_limit_slow() const noexcept { return Gamma_tilde_ss; }
};

/// Throws SingularA when A_ss is singular (G undefined) and propagates solver errors.
CovariancePack compute_pack(const TwoTimeScaleSystem& sys);

ContractionCheck check_contraction(const Matrix& a, const Matrix& p, double mu);

struct RateReport {
  double err_x = 0;   // gamma (1 + gamma/alpha + 1/(n gamma))
  double err_xy = 0;  // (gamma/alpha) (1/n + (alpha + gamma)^2 + gamma)
  double err_y = 0;   // 1/n + gamma^2/alpha
  std::uint64_t at_n = 0;
  std::string schedule_echo;
};

RateReport err_rates(const StepSizes& steps, std::uint64_t n);
RateReport err_rates(const StepSchedule& sched, std::uint64_t n);

/// C n^{-1/2} (n^{a-1/2}/(a-1/2) + 1/(b-a) + n^{b/2} + n^{2a-b-1/2}/(2a-b-1/2)).
/// Throws OutsideTheta unless in_theta_region(a, b), InvalidArgument for C <= 0.
double theorem1_bound(double a, double b, std::uint64_t n, double c = 1.0);

struct Theorem1Optimum {
  double a = 0;
  double b = 0;
  double bound = 0;
};

/// Grid search over Theta intersected with b < 1 at resolution 1e-3, then
/// coordinate-wise golden-section refinement. Requires n >= 10.
Theorem1Optimum optimize_theorem1(std::uint64_t n, double c = 1.0);

struct NormExpectation {
  double mean = 0;
  double std_error = 0;
};

/// E||Z|| for Z ~ N(0, cov) by plain Monte Carlo with `draws` samples.
NormExpectation expected_gaussian_norm(const Matrix& cov, std::uint64_t draws, std::uint64_t seed, double scale = 0.0);

struct Corollary1Targets {
  NormExpectation fast;  // Z_1 ~ N(0, G Sbar_ff G^T)
  NormExpectation slow;  // Z_2 ~ N(0, Delta Sbar_ss Delta^T)
};

Corollary1Targets corollary1_targets(const CovariancePack& pack, std::uint64_t draws = 1000000,
                                     std::uint64_t seed = 0x5eed);

struct LowerBound {
  double value = 0;
  std::string regime;  // "fano" or "lecam"
  double kappa = 0;
};

/// d > 48 ln 2: (1/3) sqrt(d ||S|| / (128 n kappa)), regime "fano".
/// Otherwise: (1/2) sqrt(||S|| / (n kappa)) max{1 - kappa^{-1/2}, e^{-1/kappa}/2}, regime "lecam".
LowerBound lower_bound(std::uint64_t d, std::uint64_t n, const SpdMatrix& sigma);

struct OracleCovariance {
  Matrix Sigma_ff_star;
  Matrix Sigma_ss_star;
};

/// Asymptotic covariances of the gain-matrix oracle with gains G^{-1} and
/// Delta^{-1}: with Gamma_tilde = D A^{-1} Gamma A^{-T} D^T, D = blockdiag(G, Delta),
/// solves (Q M - I/2) S + S (Q M - I/2)^T = Q Gamma_tilde_blk Q^T for
/// (M, Q) = (G, G^{-1}) and (Delta, Delta^{-1}).
OracleCovariance oracle_covariance(const CovariancePack& pack, const TwoTimeScaleSystem& sys);

/// Same Lyapunov construction with an arbitrary slow gain Q; used to check
/// that Delta^{-1} minimises the trace.
Matrix oracle_slow_covariance_with_gain(const CovariancePack& pack, const TwoTimeScaleSystem& sys, const Matrix& q);

struct Lemma1Deviation {
  double delta_x_tilde = 0;  // ||E[x~ x~^T] - alpha_n S_ff||_{P_ff}
  double delta_y = 0;        // ||E[y^ y^^T] - gamma_n S_ss||_{P_Delta}
  double delta_x = 0;        // ||E[x^ x^^T] - alpha_n S_ff||_{P_ff}
};

Lemma1Deviation lemma1_deviation(const Matrix& m_x_tilde, const Matrix& m_y_hat, const Matrix& m_x_hat,
                                 const CovariancePack& pack, const StepSchedule& sched, std::uint64_t n);

/// Shape d ||Gamma^{1/2}|| n^{-1/4} of the martingale CLT rate, with an
/// unknown absolute constant set to 1.
double martingale_clt_shape(const TwoTimeScaleSystem& sys, std::uint64_t n);

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json pack_to_json(const CovariancePack& pack);

}  // namespace tsalab
