#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tsalab/keyvalue.hpp"

namespace tsalab {

struct StepSizes {
  double alpha;
  double gamma;
};

enum class ScheduleKind { Polynomial, LogCorrected, OffsetExperiment };

enum class LogBase { Natural, Ten };

/// Step-size rule producing (alpha_t, gamma_t) for t >= 1:
///
///  - Polynomial:       alpha_1 t^-a, gamma_1 t^-b with 1/2 < a < b < 1
///  - LogCorrected:     exponents a = 1/2 + c_a / log n, b = 1/2 + c_b / log n
///                      for a fixed horizon n, 0 < c_a < c_b <= 2 c_a
///  - OffsetExperiment: alpha_1 / (t + offset)^(1/2 + c_a / log(t + 1)),
///                      same for gamma with c_b
///
/// All kinds require gamma_1 < alpha_1 (Polynomial) or gamma_1 <= alpha_1,
/// which together with b > a gives gamma_t <= alpha_t for every t.
class StepSchedule {
 public:
  static StepSchedule polynomial(double alpha1, double a, double gamma1, double b);
  static StepSchedule log_corrected(double alpha1, double c_a, double gamma1, double c_b, std::uint64_t horizon);
  static StepSchedule offset_experiment(double alpha1, double c_a, double gamma1, double c_b, std::uint64_t offset,
                                        LogBase base = LogBase::Natural);

  ScheduleKind kind() const noexcept { return kind_; }
  double alpha1() const noexcept { return alpha1_; }
  double gamma1() const noexcept { return gamma1_; }
  /// Exponents; for LogCorrected these are the horizon-dependent values.
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double c_a() const noexcept { return c_a_; }
  double c_b() const noexcept { return c_b_; }
  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t horizon() const noexcept { return horizon_; }
  LogBase log_base() const noexcept { return log_base_; }

  /// Throws InvalidTime for t = 0.
  StepSizes at(std::uint64_t t) const;

  /// Human-readable one-liner, e.g. "polynomial(alpha1=1,a=0.6,gamma1=0.5,b=0.75)".
  std::string describe() const;

 private:
  StepSchedule() = default;

  ScheduleKind kind_ = ScheduleKind::Polynomial;
  double alpha1_ = 0, gamma1_ = 0;
  double a_ = 0, b_ = 0;
  double c_a_ = 0, c_b_ = 0;
  std::uint64_t offset_ = 0;
  std::uint64_t horizon_ = 0;
  LogBase log_base_ = LogBase::Natural;
};

inline StepSizes step_sizes(const StepSchedule& sched, std::uint64_t t) { return sched.at(t); }

/// 1/2 < a < b < 2a - 1/2
bool in_theta_region(double a, double b);

/// lim alpha_t / gamma_t. Infinity for Polynomial (b > a);
/// (alpha_1 / gamma_1) e^{c_b - c_a} for the log-corrected forms.
double timescale_gap_limit(const StepSchedule& sched);

struct GapConditionReport {
  bool holds = false;
  double bound = 0;          // (1/4) min{mu_ff/M_f', mu_ff/M_fs', mu_Delta/M_s'}
  double max_ratio = 0;      // max gamma_t / alpha_t over the checked range
  std::optional<std::uint64_t> first_violation;
  std::uint64_t checked_up_to = 0;
  std::string note;
};

/// Checks gamma_t / alpha_t <= bound for t in [1, t_max]. The ratio is
/// nonincreasing for Polynomial and LogCorrected, so t = 1 suffices there;
/// for OffsetExperiment it increases towards its limit and every t is checked.
GapConditionReport validate_gap_condition(const StepSchedule& sched, double mu_ff, double mu_delta, double m_f,
                                          double m_fs, double m_s, std::uint64_t t_max);

/// Reads kind/alpha1/gamma1/... below `prefix` (e.g. "schedule.").
StepSchedule schedule_from_keyvalue(const KeyValueFile& kv, const std::string& prefix);
void schedule_to_keyvalue(const StepSchedule& sched, KeyValueFile& kv, const std::string& prefix);

}  // namespace tsalab
