#include "tsalab/dynamics.hpp"

#include <string>

namespace tsalab {

namespace {

void write_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
}

}  // namespace

TrajectoryState init_trajectory(const TwoTimeScaleSystem& sys, const Vector& x0, const Vector& y0, bool diagnostics,
                                std::uint64_t burn_in) {
  if (x0.size() != sys.dx() || y0.size() != sys.dy()) {
    throw Error(ErrorCode::DimensionMismatch, "initial point does not match the system dimensions");
  }
  if (!x0.allFinite() || !y0.allFinite()) throw Error(ErrorCode::InvalidArgument, "initial point must be finite");
  TrajectoryState s;
  s.t = 1;
  s.x = x0;
  s.y = y0;
  s.x_bar = x0;
  s.y_bar = y0;
  s.burn_in = burn_in;
  s.fx.resize(sys.dx());
  s.fy.resize(sys.dy());
  if (diagnostics) {
    TrajectoryDiagnostics d;
    d.L = Matrix::Zero(sys.dx(), sys.dy());
    d.tele_x = Vector::Zero(sys.dx());
    d.tele_y = Vector::Zero(sys.dy());
    d.noise_fast = Vector::Zero(sys.dx());
    d.noise_slow = Vector::Zero(sys.dy());
    d.sum_x = Vector::Zero(sys.dx());
    d.sum_y = Vector::Zero(sys.dy());
    Eigen::PartialPivLU<Matrix> ss_lu(sys.a_ss().transpose());
    if (!(ss_lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularA, "A_ss is numerically singular");
    d.a_fs_a_ss_inv = ss_lu.solve(sys.a_fs().transpose()).transpose();
    d.a_sf_a_ff_inv = sys.a_ff().transpose().partialPivLu().solve(sys.a_sf().transpose()).transpose();
    s.diag = std::move(d);
  }
  return s;
}

Matrix update_L(const Matrix& l, const TwoTimeScaleSystem& sys, double alpha, double gamma) {
  if (l.rows() != sys.dx() || l.cols() != sys.dy()) throw Error(ErrorCode::DimensionMismatch, "L must be dx x dy");
  const Matrix d_eff = sys.delta() - sys.a_sf() * l;
  const Matrix rhs = l - alpha * (sys.a_ff() * l) + gamma * (sys.a_ff_inv_a_fs() * d_eff);
  const Matrix right = Matrix::Identity(sys.dy(), sys.dy()) - gamma * d_eff;
  // L_{t+1} right = rhs  <=>  right^T L_{t+1}^T = rhs^T
  Eigen::PartialPivLU<Matrix> lu(right.transpose());
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularUpdate, "I - gamma (Delta - A_sf L) is singular");
  Matrix next = lu.solve(rhs.transpose()).transpose();
  if (!next.allFinite()) throw Error(ErrorCode::SingularUpdate, "L update produced non-finite entries");
  return next;
}

void step(TrajectoryState& s, const TwoTimeScaleSystem& sys, const StepSizes& st, const NoiseSample& noise) {
  if (noise.w.size() != sys.dx() || noise.v.size() != sys.dy()) {
    throw Error(ErrorCode::DimensionMismatch, "noise sample does not match the system dimensions");
  }
  s.fx.noalias() = sys.a_ff() * s.x;
  s.fx.noalias() += sys.a_fs() * s.y;
  s.fx -= noise.w;
  s.fy.noalias() = sys.a_sf() * s.x;
  s.fy.noalias() += sys.a_ss() * s.y;
  s.fy -= noise.v;

  if (s.diag) {
    s.x_prev = s.x;
    s.y_prev = s.y;
  }
  s.x -= st.alpha * s.fx;
  s.y -= st.gamma * s.fy;
  if (!s.x.allFinite() || !s.y.allFinite()) {
    throw Error(ErrorCode::NonFiniteIterate, "non-finite iterate at t = " + std::to_string(s.t + 1));
  }

  if (s.diag) {
    auto& d = *s.diag;
    d.sum_x += s.x_prev;
    d.sum_y += s.y_prev;
    d.tele_x += (s.x_prev - s.x) / st.alpha;
    d.tele_y += (s.y_prev - s.y) / st.gamma;
    const Vector wc = noise.w - sys.noise_mean().head(sys.dx());
    const Vector vc = noise.v - sys.noise_mean().tail(sys.dy());
    d.noise_fast += wc - d.a_fs_a_ss_inv * vc;
    d.noise_slow += vc - d.a_sf_a_ff_inv * wc;
    d.L = update_L(d.L, sys, st.alpha, st.gamma);
    ++d.steps;
  }

  ++s.t;
  if (s.t > s.burn_in) {
    const std::uint64_t count = s.t - s.burn_in;
    if (count == 1) {
      s.x_bar = s.x;
      s.y_bar = s.y;
    } else {
      const double inv = 1.0 / static_cast<double>(count);
      s.x_bar += inv * (s.x - s.x_bar);
      s.y_bar += inv * (s.y - s.y_bar);
    }
  } else {
    s.x_bar = s.x;
    s.y_bar = s.y;
  }
}

void step(TrajectoryState& state, const TwoTimeScaleSystem& sys, const StepSchedule& sched, const NoiseSample& noise) {
  step(state, sys, sched.at(state.t), noise);
}

ErrorSnapshot snapshot_errors(const TrajectoryState& s, const TwoTimeScaleSystem& sys) {
  if (!s.diag) throw Error(ErrorCode::DiagnosticsDisabled, "snapshot_errors requires diagnostics");
  ErrorSnapshot e;
  e.t = s.t;
  e.y_hat = s.y - sys.y_star();
  e.x_hat = (s.x - sys.x_star()) + sys.a_ff_inv_a_fs() * e.y_hat;
  e.x_tilde = e.x_hat + s.diag->L * e.y_hat;
  e.pr_x_err = s.x_bar - sys.x_star();
  e.pr_y_err = s.y_bar - sys.y_star();
  return e;
}

PrIdentityResidual verify_pr_identity(const TrajectoryState& s, const TwoTimeScaleSystem& sys) {
  if (!s.diag) throw Error(ErrorCode::DiagnosticsDisabled, "verify_pr_identity requires diagnostics");
  const auto& d = *s.diag;
  if (d.steps == 0) throw Error(ErrorCode::InvalidArgument, "verify_pr_identity needs at least one step");
  const double inv_n = 1.0 / static_cast<double>(d.steps);
  const Matrix g = sys.a_ff() - d.a_fs_a_ss_inv * sys.a_sf();
  const Vector xbar = inv_n * d.sum_x;
  const Vector ybar = inv_n * d.sum_y;

  const Vector fast = g * (xbar - sys.x_star()) - inv_n * d.noise_fast -
                      inv_n * (d.tele_x - d.a_fs_a_ss_inv * d.tele_y);
  const Vector slow = sys.delta() * (ybar - sys.y_star()) - inv_n * d.noise_slow -
                      inv_n * (d.tele_y - d.a_sf_a_ff_inv * d.tele_x);
  return {fast.norm(), slow.norm(), d.steps};
}

void write_trace_header(std::ostream& out, Eigen::Index dx, Eigen::Index dy) {
  out << 't';
  for (Eigen::Index i = 1; i <= dx; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i <= dy; ++i) out << ",y_" << i;
  for (Eigen::Index i = 1; i <= dx; ++i) out << ",x_bar_" << i;
  for (Eigen::Index i = 1; i <= dy; ++i) out << ",y_bar_" << i;
  out << '\n';
}

void write_trace_row(std::ostream& out, const TrajectoryState& s) {
  out << s.t;
  write_vector(out, s.x);
  write_vector(out, s.y);
  write_vector(out, s.x_bar);
  write_vector(out, s.y_bar);
  out << '\n';
}

}  // namespace tsalab
