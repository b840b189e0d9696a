#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "tsalab/schedule.hpp"

using namespace tsalab;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidArgument;
}

std::vector<std::uint64_t> log_times(std::uint64_t hi) {
  std::vector<std::uint64_t> out;
  for (double t = 1; t <= static_cast<double>(hi); t *= 1.37) {
    const auto v = static_cast<std::uint64_t>(t);
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(Polynomial, Values) {
  const auto s = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  EXPECT_DOUBLE_EQ(s.at(1).alpha, 0.5);
  EXPECT_DOUBLE_EQ(s.at(1).gamma, 0.25);
  EXPECT_NEAR(s.at(1000).alpha, 0.5 * std::pow(1000.0, -0.6), 1e-17);
  EXPECT_NEAR(s.at(1000).gamma, 0.25 * std::pow(1000.0, -0.75), 1e-17);
  // With the smallest admissible exponent above 1/2 the value at t = 4 tends to 0.25.
  const auto near_half = StepSchedule::polynomial(0.5, 0.5 + 1e-12, 0.25, 0.75);
  EXPECT_NEAR(near_half.at(4).alpha, 0.25, 1e-11);
}

TEST(Polynomial, RejectsInvalid) {
  EXPECT_EQ(code_of([] { StepSchedule::polynomial(1, 0.6, 1, 1.0); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::polynomial(0.5, 0.5, 0.25, 0.75); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::polynomial(0.5, 0.7, 0.25, 0.6); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::polynomial(0.5, 0.6, 0.5, 0.7); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::polynomial(-1, 0.6, 0.5, 0.7); }), ErrorCode::InvalidSchedule);
}

TEST(Schedule, TimeZeroRejected) {
  const auto s = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  EXPECT_EQ(code_of([&] { s.at(0); }), ErrorCode::InvalidTime);
}

TEST(OffsetExperiment, FirstStep) {
  const auto s = StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000);
  const double expect = 0.5 / std::pow(1001.0, 0.5 + 0.1 / std::log(2.0));
  EXPECT_NEAR(s.at(1).alpha, expect, 1e-18);
  EXPECT_NEAR(s.at(1).alpha, 5.83e-3, 5e-5);
  EXPECT_NEAR(s.at(1).gamma, 0.5 / std::pow(1001.0, 0.5 + 0.2 / std::log(2.0)), 1e-18);
}

TEST(OffsetExperiment, Base10Switch) {
  const auto s = StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000, LogBase::Ten);
  EXPECT_NEAR(s.at(9).alpha, 0.5 / std::pow(1009.0, 0.5 + 0.1), 1e-16);
}

TEST(OffsetExperiment, RejectsInvalid) {
  EXPECT_EQ(code_of([] { StepSchedule::offset_experiment(0.5, 0.2, 0.5, 0.1, 1000); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::offset_experiment(0.5, 0.0, 0.5, 0.1, 1000); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::offset_experiment(0.5, 0.1, 0.6, 0.2, 1000); }), ErrorCode::InvalidSchedule);
}

TEST(LogCorrected, ExponentIdentity) {
  for (std::uint64_t n : {100ULL, 10000ULL, 1000000ULL}) {
    const auto s = StepSchedule::log_corrected(1.0, 0.1, 0.5, 0.15, n);
    EXPECT_NEAR(std::pow(static_cast<double>(n), s.a() - 0.5), std::exp(0.1), 1e-12);
    EXPECT_NEAR(std::pow(static_cast<double>(n), s.b() - 0.5), std::exp(0.15), 1e-12);
  }
  const auto big = StepSchedule::log_corrected(1.0, 0.1, 0.5, 0.15, 1ULL << 60);
  EXPECT_LT(big.a() - 0.5, 0.003);
}

TEST(LogCorrected, BoundaryAcceptedOutsideRejected) {
  EXPECT_NO_THROW(StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.2, 1000));
  EXPECT_EQ(code_of([] { StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.25, 1000); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.1, 1000); }), ErrorCode::InvalidSchedule);
  EXPECT_EQ(code_of([] { StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.15, 1); }), ErrorCode::InvalidSchedule);
}

TEST(Schedule, MonotoneAndOrdered) {
  // The offset form rises while the log-dependent exponent falls faster than
  // the base grows (up to t = 75 for alpha and t = 124 for gamma with
  // offset 1000), so its monotonicity is checked from t = 200 on.
  struct Case {
    StepSchedule s;
    std::uint64_t monotone_from;
  };
  const std::vector<Case> all{
      {StepSchedule::polynomial(1.0, 0.6, 0.5, 0.75), 1},
      {StepSchedule::polynomial(0.3, 0.55, 0.29, 0.6), 1},
      {StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.2, 100000), 1},
      {StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000), 200},
      {StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 0), 1},
  };
  for (const auto& [s, from] : all) {
    const auto ts = log_times(10000000);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto st = s.at(ts[i]);
      EXPECT_GT(st.gamma, 0.0) << s.describe();
      EXPECT_LE(st.gamma, st.alpha) << s.describe() << " t=" << ts[i];
      if (i > 0 && ts[i - 1] >= from) {
        const auto prev = s.at(ts[i - 1]);
        EXPECT_LT(st.alpha, prev.alpha) << s.describe();
        EXPECT_LT(st.gamma, prev.gamma) << s.describe();
      }
    }
  }
}

TEST(OffsetExperiment, EarlyStepsRise) {
  const auto s = StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000);
  EXPECT_GT(s.at(75).alpha, s.at(1).alpha);
  EXPECT_GT(s.at(75).alpha, s.at(76).alpha);
  EXPECT_GT(s.at(124).gamma, s.at(1).gamma);
  EXPECT_GT(s.at(124).gamma, s.at(125).gamma);
}

TEST(Polynomial, DiscreteDerivativeBounds) {
  const auto s = StepSchedule::polynomial(1.0, 0.6, 0.5, 0.75);
  for (std::uint64_t t = 1; t <= 1000000; t += (t < 1000 ? 1 : 997)) {
    const auto now = s.at(t), next = s.at(t + 1);
    const double td = static_cast<double>(t);
    EXPECT_LE(1 / next.alpha - 1 / now.alpha, 1 / (td * now.alpha) * (1 + 1e-12));
    EXPECT_LE(1 / next.gamma - 1 / now.gamma, 1 / (td * now.gamma) * (1 + 1e-12));
  }
}

TEST(Theta, Membership) {
  EXPECT_TRUE(in_theta_region(0.6, 0.65));
  EXPECT_FALSE(in_theta_region(0.55, 0.65));
  EXPECT_TRUE(in_theta_region(0.55, 0.59));
  EXPECT_FALSE(in_theta_region(0.5, 0.6));
  EXPECT_FALSE(in_theta_region(0.7, 0.65));
}

TEST(GapLimit, Values) {
  EXPECT_NEAR(timescale_gap_limit(StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.2, 1000)), std::exp(0.1), 1e-12);
  EXPECT_NEAR(timescale_gap_limit(StepSchedule::log_corrected(1.0, 0.1, 1.0, 0.2, 1000)), 1.10517, 1e-5);
  EXPECT_TRUE(std::isinf(timescale_gap_limit(StepSchedule::polynomial(1.0, 0.6, 0.5, 0.7))));
  EXPECT_NEAR(timescale_gap_limit(StepSchedule::offset_experiment(0.5, 0.1, 0.25, 0.2, 1000)), 2 * std::exp(0.1),
              1e-12);
}

TEST(GapCondition, Examples) {
  // gamma_1/alpha_1 = 0.1 against a bound of 0.5.
  const auto pass = validate_gap_condition(StepSchedule::polynomial(1.0, 0.6, 0.1, 0.7), 2, 2, 1, 1, 1, 1000000);
  EXPECT_TRUE(pass.holds);
  EXPECT_NEAR(pass.bound, 0.5, 1e-15);
  // gamma_1/alpha_1 = 0.3 against a bound of 0.25.
  const auto fail = validate_gap_condition(StepSchedule::polynomial(1.0, 0.6, 0.3, 0.7), 1, 1, 1, 1, 1, 1000000);
  EXPECT_FALSE(fail.holds);
  ASSERT_TRUE(fail.first_violation.has_value());
  EXPECT_EQ(*fail.first_violation, 1u);
  EXPECT_THROW(validate_gap_condition(StepSchedule::polynomial(1.0, 0.6, 0.3, 0.7), 0, 1, 1, 1, 1, 10), Error);
}

TEST(GapCondition, OffsetRatioChecked) {
  const auto s = StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000);
  const double r1 = std::pow(1001.0, (0.1 - 0.2) / std::log(2.0));
  EXPECT_NEAR(s.at(1).gamma / s.at(1).alpha, r1, 1e-14);
  EXPECT_LT(r1, 1.0);
  // The ratio grows with t, so a bound just above its t = 1 value fails later.
  const auto rep = validate_gap_condition(s, 4 * r1 * 1.01, 4, 1, 1, 1, 100000);
  EXPECT_FALSE(rep.holds);
  ASSERT_TRUE(rep.first_violation.has_value());
  EXPECT_GT(*rep.first_violation, 1u);
  const auto ok = validate_gap_condition(s, 4, 4, 1, 1, 1, 100000);
  EXPECT_TRUE(ok.holds);
}

TEST(Schedule, KeyValueRoundTrip) {
  const std::vector<StepSchedule> all{
      StepSchedule::polynomial(1.0, 0.6, 0.5, 0.75),
      StepSchedule::log_corrected(1.0, 0.1, 0.5, 0.2, 100000),
      StepSchedule::offset_experiment(0.5, 0.1, 0.5, 0.2, 1000, LogBase::Ten),
  };
  for (const auto& s : all) {
    KeyValueFile kv;
    schedule_to_keyvalue(s, kv, "schedule.");
    const auto back = schedule_from_keyvalue(kv, "schedule.");
    EXPECT_EQ(back.describe(), s.describe());
    for (std::uint64_t t : {1ULL, 17ULL, 123456ULL}) {
      EXPECT_EQ(back.at(t).alpha, s.at(t).alpha);
      EXPECT_EQ(back.at(t).gamma, s.at(t).gamma);
    }
  }
  EXPECT_THROW(schedule_from_keyvalue(KeyValueFile::parse("schedule.kind = cosine\n"), "schedule."), Error);
}
