#include "tsalab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tsalab {

namespace {

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::InvalidSchedule, msg);
}

}  // namespace

StepSchedule StepSchedule::polynomial(double alpha1, double a, double gamma1, double b) {
  require(positive_finite(alpha1) && positive_finite(gamma1), "polynomial: alpha1 and gamma1 must be > 0");
  require(0.5 < a && a < b && b < 1.0, "polynomial: exponents must satisfy 1/2 < a < b < 1");
  require(gamma1 < alpha1, "polynomial: gamma1 < alpha1 is required so that gamma_t < alpha_t");
  StepSchedule s;
  s.kind_ = ScheduleKind::Polynomial;
  s.alpha1_ = alpha1;
  s.gamma1_ = gamma1;
  s.a_ = a;
  s.b_ = b;
  return s;
}

StepSchedule StepSchedule::log_corrected(double alpha1, double c_a, double gamma1, double c_b,
                                         std::uint64_t horizon) {
  require(positive_finite(alpha1) && positive_finite(gamma1), "log_corrected: alpha1 and gamma1 must be > 0");
  // The closed upper end admits the commonly used c_a = 0.1, c_b = 0.2.
  require(0.0 < c_a && c_a < c_b && c_b <= 2.0 * c_a, "log_corrected: constants must satisfy 0 < c_a < c_b <= 2 c_a");
  require(horizon >= 2, "log_corrected: horizon must be >= 2");
  require(gamma1 <= alpha1, "log_corrected: gamma1 <= alpha1 is required");
  StepSchedule s;
  s.kind_ = ScheduleKind::LogCorrected;
  s.alpha1_ = alpha1;
  s.gamma1_ = gamma1;
  s.c_a_ = c_a;
  s.c_b_ = c_b;
  s.horizon_ = horizon;
  const double log_n = std::log(static_cast<double>(horizon));
  s.a_ = 0.5 + c_a / log_n;
  s.b_ = 0.5 + c_b / log_n;
  return s;
}

StepSchedule StepSchedule::offset_experiment(double alpha1, double c_a, double gamma1, double c_b,
                                             std::uint64_t offset, LogBase base) {
  require(positive_finite(alpha1) && positive_finite(gamma1), "offset_experiment: alpha1 and gamma1 must be > 0");
  require(0.0 < c_a && c_a < c_b && std::isfinite(c_b), "offset_experiment: constants must satisfy 0 < c_a < c_b");
  require(gamma1 <= alpha1, "offset_experiment: gamma1 <= alpha1 is required");
  StepSchedule s;
  s.kind_ = ScheduleKind::OffsetExperiment;
  s.alpha1_ = alpha1;
  s.gamma1_ = gamma1;
  s.c_a_ = c_a;
  s.c_b_ = c_b;
  s.offset_ = offset;
  s.log_base_ = base;
  return s;
}

StepSizes StepSchedule::at(std::uint64_t t) const {
  if (t == 0) throw Error(ErrorCode::InvalidTime, "step sizes are defined for t >= 1");
  const double td = static_cast<double>(t);
  switch (kind_) {
    case ScheduleKind::Polynomial:
    case ScheduleKind::LogCorrected:
      return {alpha1_ * std::pow(td, -a_), gamma1_ * std::pow(td, -b_)};
    case ScheduleKind::OffsetExperiment: {
      const double lg = log_base_ == LogBase::Natural ? std::log(td + 1.0) : std::log10(td + 1.0);
      const double base = td + static_cast<double>(offset_);
      return {alpha1_ * std::pow(base, -(0.5 + c_a_ / lg)), gamma1_ * std::pow(base, -(0.5 + c_b_ / lg))};
    }
  }
  return {0, 0};
}

std::string StepSchedule::describe() const {
  switch (kind_) {
    case ScheduleKind::Polynomial:
      return "polynomial(alpha1=" + format_double(alpha1_) + ",a=" + format_double(a_) +
             ",gamma1=" + format_double(gamma1_) + ",b=" + format_double(b_) + ")";
    case ScheduleKind::LogCorrected:
      return "log_corrected(alpha1=" + format_double(alpha1_) + ",c_a=" + format_double(c_a_) +
             ",gamma1=" + format_double(gamma1_) + ",c_b=" + format_double(c_b_) +
             ",horizon=" + std::to_string(horizon_) + ")";
    case ScheduleKind::OffsetExperiment:
      return "offset_experiment(alpha1=" + format_double(alpha1_) + ",c_a=" + format_double(c_a_) +
             ",gamma1=" + format_double(gamma1_) + ",c_b=" + format_double(c_b_) +
             ",offset=" + std::to_string(offset_) + ",log_base=" + (log_base_ == LogBase::Natural ? "e" : "10") +
             ")";
  }
  return {};
}

bool in_theta_region(double a, double b) { return 0.5 < a && a < b && b < 2.0 * a - 0.5; }

double timescale_gap_limit(const StepSchedule& sched) {
  switch (sched.kind()) {
    case ScheduleKind::Polynomial:
      return std::numeric_limits<double>::infinity();
    case ScheduleKind::LogCorrected:
      return sched.alpha1() / sched.gamma1() * std::exp(sched.c_b() - sched.c_a());
    case ScheduleKind::OffsetExperiment: {
      // (t + offset)^{(c_b - c_a)/log(t+1)} -> base^{c_b - c_a}
      const double base = sched.log_base() == LogBase::Natural ? std::exp(1.0) : 10.0;
      return sched.alpha1() / sched.gamma1() * std::pow(base, sched.c_b() - sched.c_a());
    }
  }
  return 0;
}

GapConditionReport validate_gap_condition(const StepSchedule& sched, double mu_ff, double mu_delta, double m_f,
                                          double m_fs, double m_s, std::uint64_t t_max) {
  if (!(mu_ff > 0 && mu_delta > 0 && m_f > 0 && m_fs > 0 && m_s > 0)) {
    throw Error(ErrorCode::InvalidArgument, "validate_gap_condition: all constants must be positive");
  }
  if (t_max == 0) throw Error(ErrorCode::InvalidTime, "validate_gap_condition: t_max must be >= 1");
  GapConditionReport rep;
  rep.bound = 0.25 * std::min({mu_ff / m_f, mu_ff / m_fs, mu_delta / m_s});

  auto ratio = [&](std::uint64_t t) {
    const auto s = sched.at(t);
    return s.gamma / s.alpha;
  };

  if (sched.kind() == ScheduleKind::OffsetExperiment) {
    rep.note = "ratio increases with t for the offset form; every t in [1, t_max] checked";
    for (std::uint64_t t = 1; t <= t_max; ++t) {
      const double r = ratio(t);
      rep.max_ratio = std::max(rep.max_ratio, r);
      if (!rep.first_violation && r > rep.bound) {
        rep.first_violation = t;
        break;
      }
    }
    rep.checked_up_to = rep.first_violation ? *rep.first_violation : t_max;
  } else {
    rep.note = "gamma_t/alpha_t is nonincreasing for this kind; t = 1 is the binding case";
    rep.max_ratio = ratio(1);
    if (rep.max_ratio > rep.bound) rep.first_violation = 1;
    rep.checked_up_to = 1;
  }
  rep.holds = !rep.first_violation.has_value();
  return rep;
}

StepSchedule schedule_from_keyvalue(const KeyValueFile& kv, const std::string& prefix) {
  const std::string kind = kv.get(prefix + "kind");
  const double alpha1 = kv.get_double(prefix + "alpha1");
  const double gamma1 = kv.get_double(prefix + "gamma1");
  if (kind == "polynomial") {
    return StepSchedule::polynomial(alpha1, kv.get_double(prefix + "a"), gamma1, kv.get_double(prefix + "b"));
  }
  if (kind == "log_corrected") {
    const auto horizon = kv.get_int(prefix + "horizon");
    if (horizon < 2) throw Error(ErrorCode::InvalidSchedule, prefix + "horizon must be >= 2");
    return StepSchedule::log_corrected(alpha1, kv.get_double(prefix + "c_a"), gamma1, kv.get_double(prefix + "c_b"),
                                       static_cast<std::uint64_t>(horizon));
  }
  if (kind == "offset_experiment") {
    const auto offset = kv.get_int_or(prefix + "offset", 0);
    if (offset < 0) throw Error(ErrorCode::InvalidSchedule, prefix + "offset must be >= 0");
    const std::string base = kv.get_or(prefix + "log_base", "e");
    if (base != "e" && base != "10") throw Error(ErrorCode::InvalidSchedule, prefix + "log_base must be e or 10");
    return StepSchedule::offset_experiment(alpha1, kv.get_double(prefix + "c_a"), gamma1,
                                           kv.get_double(prefix + "c_b"), static_cast<std::uint64_t>(offset),
                                           base == "e" ? LogBase::Natural : LogBase::Ten);
  }
  throw Error(ErrorCode::InvalidSchedule, "unknown schedule kind '" + kind + "'");
}

void schedule_to_keyvalue(const StepSchedule& sched, KeyValueFile& kv, const std::string& prefix) {
  kv.set_double(prefix + "alpha1", sched.alpha1());
  kv.set_double(prefix + "gamma1", sched.gamma1());
  switch (sched.kind()) {
    case ScheduleKind::Polynomial:
      kv.set(prefix + "kind", "polynomial");
      kv.set_double(prefix + "a", sched.a());
      kv.set_double(prefix + "b", sched.b());
      break;
    case ScheduleKind::LogCorrected:
      kv.set(prefix + "kind", "log_corrected");
      kv.set_double(prefix + "c_a", sched.c_a());
      kv.set_double(prefix + "c_b", sched.c_b());
      kv.set(prefix + "horizon", std::to_string(sched.horizon()));
      break;
    case ScheduleKind::OffsetExperiment:
      kv.set(prefix + "kind", "offset_experiment");
      kv.set_double(prefix + "c_a", sched.c_a());
      kv.set_double(prefix + "c_b", sched.c_b());
      kv.set(prefix + "offset", std::to_string(sched.offset()));
      kv.set(prefix + "log_base", sched.log_base() == LogBase::Natural ? "e" : "10");
      break;
  }
}

}  // namespace tsalab
