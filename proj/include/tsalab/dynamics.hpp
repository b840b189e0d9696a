#pragma once

#include <cstdint>
#include <optional>
#include <ostream>

#include "tsalab/matlib.hpp"
#include "tsalab/schedule.hpp"
#include "tsalab/system.hpp"

namespace tsalab {

/// Extra bookkeeping carried when diagnostics are enabled.
struct TrajectoryDiagnostics {
  Matrix L;  // dx x dy, decoupling sequence, L = 0 at start
  // Sums over completed steps s = 1..n of alpha_s^{-1}(x_s - x_{s+1}) and
  // gamma_s^{-1}(y_s - y_{s+1}).
  Vector tele_x, tele_y;
  // Sums of the centred noise combinations W - A_fs A_ss^{-1} V and
  // V - A_sf A_ff^{-1} W.
  Vector noise_fast, noise_slow;
  // Sums of the pre-step iterates x_1..x_n, y_1..y_n.
  Vector sum_x, sum_y;
  std::uint64_t steps = 0;
  // Cached operators.
  Matrix a_fs_a_ss_inv;  // A_fs A_ss^{-1}
  Matrix a_sf_a_ff_inv;  // A_sf A_ff^{-1}
};

/// State of one trajectory at time t: x_t, y_t and the running averages of
/// x_1..x_t, y_1..y_t (or of the post burn-in suffix when burn_in > 0).
struct TrajectoryState {
  std::uint64_t t = 1;
  Vector x, y;
  Vector x_bar, y_bar;
  std::uint64_t burn_in = 0;
  std::optional<TrajectoryDiagnostics> diag;

  bool diagnostics_enabled() const noexcept { return diag.has_value(); }

  // Scratch space reused by step(); not part of the logical state.
  Vector fx, fy, x_prev, y_prev;
};

struct ErrorSnapshot {
  std::uint64_t t = 0;
  Vector x_hat;     // (x_t - x*) + A_ff^{-1} A_fs (y_t - y*)
  Vector y_hat;     // y_t - y*
  Vector x_tilde;   // x_hat + L_t y_hat
  Vector pr_x_err;  // x_bar_t - x*
  Vector pr_y_err;  // y_bar_t - y*
};

struct PrIdentityResidual {
  double fast = 0;
  double slow = 0;
  std::uint64_t n = 0;  // number of completed steps the identity covers
};

/// burn_in > 0 excludes x_1..x_{burn_in} from the running averages. This is
/// an exploratory option; the default 0 averages from the initial point.
TrajectoryState init_trajectory(const TwoTimeScaleSystem& sys, const Vector& x0, const Vector& y0,
                                bool diagnostics, std::uint64_t burn_in = 0);

/// One step of
///   x_{t+1} = x_t - alpha_t (A_ff x_t + A_fs y_t - W_t)
///   y_{t+1} = y_t - gamma_t (A_sf x_t + A_ss y_t - V_t)
/// in place, where `noise` carries (W_t, V_t) including the noise mean.
/// Throws NonFiniteIterate when any entry of x_{t+1}, y_{t+1} is not finite.
void step(TrajectoryState& state, const TwoTimeScaleSystem& sys, const StepSizes& steps, const NoiseSample& noise);
void step(TrajectoryState& state, const TwoTimeScaleSystem& sys, const StepSchedule& sched, const NoiseSample& noise);

/// Solves L_{t+1} (I - gamma (Delta - A_sf L)) = L - alpha A_ff L + gamma A_ff^{-1} A_fs (Delta - A_sf L).
/// Throws SingularUpdate when the right factor is numerically singular.
Matrix update_L(const Matrix& l, const TwoTimeScaleSystem& sys, double alpha, double gamma);

/// Throws DiagnosticsDisabled when the state has no diagnostics.
ErrorSnapshot snapshot_errors(const TrajectoryState& state, const TwoTimeScaleSystem& sys);

/// Residuals of the exact averaging identities over the completed steps 1..n:
///   G (xbar_n - x*) - n^{-1} sum(w_t - A_fs A_ss^{-1} v_t)
///       - n^{-1} sum(alpha_t^{-1}(x_t - x_{t+1}) - gamma_t^{-1} A_fs A_ss^{-1}(y_t - y_{t+1}))
///   Delta (ybar_n - y*) - n^{-1} sum(v_t - A_sf A_ff^{-1} w_t)
///       - n^{-1} sum(gamma_t^{-1}(y_t - y_{t+1}) - A_sf A_ff^{-1} alpha_t^{-1}(x_t - x_{t+1}))
/// with centred noise and xbar_n the mean of the pre-step iterates x_1..x_n.
/// Throws DiagnosticsDisabled, or InvalidArgument before the first step.
PrIdentityResidual verify_pr_identity(const TrajectoryState& state, const TwoTimeScaleSystem& sys);

/// Trace CSV: t, x_1..x_dx, y_1..y_dy, x_bar_1.., y_bar_1..
void write_trace_header(std::ostream& out, Eigen::Index dx, Eigen::Index dy);
void write_trace_row(std::ostream& out, const TrajectoryState& state);

}  // namespace tsalab
