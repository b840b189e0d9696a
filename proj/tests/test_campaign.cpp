#include <gtest/gtest.h>

#include <atomic>
#include <limits>
#include <sstream>

#include "oracles.hpp"
#include "tsalab/campaign.hpp"
#include "tsalab/dynamics.hpp"

using namespace tsalab;

namespace {

CampaignSpec small_spec(std::uint64_t trials, std::vector<std::uint64_t> checkpoints, unsigned workers = 1) {
  CampaignSpec s;
  s.trials = trials;
  s.checkpoints = std::move(checkpoints);
  s.seed = 17;
  s.workers = workers;
  return s;
}

std::string checkpoints_csv(const MonteCarloReport& r) {
  std::ostringstream out;
  write_checkpoints_csv(out, r);
  return out.str();
}

// Additive noise equal to the mean: every trajectory is deterministic.
class MeanNoise final : public NoiseModel {
 public:
  explicit MeanNoise(const TwoTimeScaleSystem& sys) : sys_(&sys) {}
  void sample(const Vector&, const Vector&, Rng&, NoiseSample& out) override {
    out.w = sys_->mean_w();
    out.v = sys_->mean_v();
  }
  std::unique_ptr<NoiseModel> clone() const override { return std::make_unique<MeanNoise>(*sys_); }
  std::string name() const override { return "mean"; }

 private:
  const TwoTimeScaleSystem* sys_;
};

// Blows up on trials whose stream starts with a small draw.
class ExplodingNoise final : public NoiseModel {
 public:
  explicit ExplodingNoise(const TwoTimeScaleSystem& sys) : inner_(sys) {}
  void sample(const Vector& x, const Vector& y, Rng& rng, NoiseSample& out) override {
    inner_.sample(x, y, rng, out);
    if (x.norm() == 0 && rng.uniform() < 0.5) out.w.setConstant(std::numeric_limits<double>::infinity());
  }
  std::unique_ptr<NoiseModel> clone() const override { return std::make_unique<ExplodingNoise>(*this); }
  std::string name() const override { return "exploding"; }

 private:
  GaussianNoise inner_;
};

}  // namespace

TEST(Campaign, DeterministicAcrossWorkerCounts) {
  const auto sys = oracle::random_full_system(2, 2, 3);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  auto spec = small_spec(40, {10, 100, 500});
  spec.diagnostics = true;
  const auto one = run_campaign(sys, sched, spec);
  spec.workers = 4;
  const auto four = run_campaign(sys, sched, spec);
  spec.workers = 7;
  const auto seven = run_campaign(sys, sched, spec);
  EXPECT_EQ(checkpoints_csv(one), checkpoints_csv(four));
  EXPECT_EQ(checkpoints_csv(one), checkpoints_csv(seven));
  EXPECT_EQ(report_to_json(one).dump(), report_to_json(seven).dump());
}

TEST(Campaign, TrialsMatchStandaloneTrajectories) {
  const auto sys = oracle::random_full_system(2, 1, 5);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  const auto spec = small_spec(5, {20, 50}, 3);
  const auto r = run_campaign(sys, sched, spec);
  for (std::uint64_t k = 0; k < 5; ++k) {
    Rng rng = Rng::stream(spec.seed, k);
    GaussianNoise noise(sys);
    NoiseSample ns;
    auto s = init_trajectory(sys, Vector::Zero(2), Vector::Zero(1), false);
    while (s.t < 50) {
      noise.sample(s.x, s.y, rng, ns);
      step(s, sys, sched, ns);
    }
    const auto& t = r.checkpoints[1].trials[k];
    EXPECT_EQ(t.x_err, s.x - sys.x_star());
    EXPECT_EQ(t.ybar_err, s.y_bar - sys.y_star());
  }
}

TEST(Campaign, ZeroNoiseAtFixedPointGivesZero) {
  const auto sys = oracle::random_full_system(2, 2, 8);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  auto spec = small_spec(1, {10, 100});
  spec.x0 = sys.x_star();
  spec.y0 = sys.y_star();
  const auto r = run_campaign(sys, sched, [&] { return std::make_unique<MeanNoise>(sys); }, spec);
  for (const auto& cp : r.checkpoints) {
    ASSERT_EQ(cp.trials.size(), 1u);
    EXPECT_LE(cp.trials[0].x_err.norm(), 1e-12);
    EXPECT_LE(cp.trials[0].ybar_err.norm(), 1e-12);
  }
  EXPECT_EQ(r.noise_model, "mean");
}

TEST(Campaign, RowsAndCsvHeaders) {
  const auto sys = oracle::random_full_system(2, 2, 4);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  auto spec = small_spec(30, {10, 100});
  spec.diagnostics = true;
  const auto r = run_campaign(sys, sched, spec);
  for (std::uint64_t n : {10ULL, 100ULL}) {
    EXPECT_EQ(r.find(n, "valid_trials", "all").value, 30.0);
    for (const char* s : {"pr_error", "pr_fast_error", "pr_slow_error"}) EXPECT_TRUE(r.has(n, s, "norm")) << s;
    for (const char* s : {"pr_slow_w1", "pr_fast_w1"}) {
      EXPECT_TRUE(r.has(n, s, "1"));
      EXPECT_TRUE(r.has(n, s, "norm"));
    }
    EXPECT_TRUE(r.has(n, "pr_slow_cov", "2_2"));
    EXPECT_TRUE(r.has(n, "last_slow_mean", "1"));
    EXPECT_TRUE(r.has(n, "raw_pr_slow_std", "1"));
    EXPECT_TRUE(r.has(n, "lemma1_delta_y_over_gamma", "all"));
    EXPECT_TRUE(r.has(n, "lemma1_delta_x_tilde_over_alpha_bc", "all"));
  }
  EXPECT_THROW(r.find(1000, "pr_error", "norm"), Error);
  const std::string csv = checkpoints_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,statistic,coordinate,value,stderr");
  std::ostringstream dens;
  write_density_csv(dens, r, false, 10);
  EXPECT_EQ(dens.str().substr(0, dens.str().find('\n')), "checkpoint,grid_x,kde,hist");
  const auto& ck = r.checkpoints[1];
  const auto sample = scaled_slow_coordinate(ck, 0, false);
  ASSERT_EQ(sample.size(), 30u);
  EXPECT_DOUBLE_EQ(sample[3], 10.0 * ck.trials[3].ybar_err(0));
}

TEST(Campaign, StatisticsMatchIndependentRecomputation) {
  const auto sys = oracle::random_full_system(2, 2, 6);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  const auto r = run_campaign(sys, sched, small_spec(50, {100}, 2));
  const auto pk = compute_pack(sys);
  const auto& cp = r.checkpoints[0];
  Vector mean = Vector::Zero(2);
  double norm = 0;
  for (const auto& t : cp.trials) {
    mean += pk.Delta * t.ybar_err * 10.0;
    Vector z(4);
    z << t.xbar_err, t.ybar_err;
    norm += z.norm();
  }
  mean /= 50;
  EXPECT_NEAR(r.find(100, "pr_slow_mean", "2").value, mean(1), 1e-12);
  EXPECT_NEAR(r.find(100, "pr_error", "norm").value, norm / 50, 1e-12);
}

TEST(Campaign, TooManyFailures) {
  const auto sys = oracle::random_full_system(2, 2, 4);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  auto spec = small_spec(50, {20});
  try {
    run_campaign(sys, sched, [&] { return std::make_unique<ExplodingNoise>(sys); }, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyFailures);
  }
  spec.max_failure_fraction = 0.9;
  const auto r = run_campaign(sys, sched, [&] { return std::make_unique<ExplodingNoise>(sys); }, spec);
  EXPECT_GT(r.trials_failed, 0u);
  EXPECT_EQ(r.trials_failed, r.failed_trial_ids.size());
  EXPECT_EQ(r.checkpoints[0].trials.size() + r.trials_failed, 50u);
}

TEST(Campaign, SpecValidation) {
  CampaignSpec s;
  s.trials = 0;
  EXPECT_THROW(s.validate(), Error);
  s.trials = 1;
  s.checkpoints = {10, 10};
  EXPECT_THROW(s.validate(), Error);
  s.checkpoints = {0, 10};
  EXPECT_THROW(s.validate(), Error);
  s.checkpoints = {1, 10};
  EXPECT_NO_THROW(s.validate());
}

TEST(Comparison, IdenticalSchedulesGiveIdenticalColumns) {
  const auto sys = oracle::random_full_system(2, 2, 9);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  const auto table = schedule_comparison(sys, {sched, sched}, [&] { return std::make_unique<GaussianNoise>(sys); },
                                         small_spec(20, {10, 100}, 3));
  EXPECT_EQ(table.reference_id, 1u);
  for (std::uint64_t n : {10ULL, 100ULL}) {
    for (const char* w : {"fast", "slow"}) {
      const auto& a = table.find(0, n, w);
      const auto& b = table.find(1, n, w);
      EXPECT_EQ(a.mean_error, b.mean_error);
      EXPECT_EQ(a.ci_lo, b.ci_lo);
      ASSERT_TRUE(a.paired_diff.has_value());
      EXPECT_EQ(*a.paired_diff, 0.0);
    }
  }
  std::ostringstream out;
  write_comparison_csv(out, table);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "schedule_id,n,which,mean_error,ci_lo,ci_hi");
}

TEST(Comparison, ZeroNoiseEqualsDeterministicBias) {
  const auto sys = oracle::random_full_system(2, 2, 10);
  const std::vector<StepSchedule> scheds{StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75),
                                         StepSchedule::polynomial(0.5, 0.7, 0.25, 0.8)};
  auto spec = small_spec(3, {50});
  const auto table = schedule_comparison(sys, scheds, [&] { return std::make_unique<MeanNoise>(sys); }, spec);
  for (std::size_t i = 0; i < scheds.size(); ++i) {
    auto s = init_trajectory(sys, Vector::Zero(2), Vector::Zero(2), false);
    while (s.t < 50) step(s, sys, scheds[i], NoiseSample{sys.mean_w(), sys.mean_v()});
    EXPECT_NEAR(table.find(i, 50, "slow").mean_error, (s.y_bar - sys.y_star()).norm(), 1e-12);
    EXPECT_NEAR(table.find(i, 50, "fast").mean_error, (s.x_bar - sys.x_star()).norm(), 1e-12);
  }
}

TEST(Comparison, RequiresTwoSchedules) {
  const auto sys = oracle::random_full_system(1, 1, 1);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  EXPECT_THROW(schedule_comparison(sys, {sched}, [&] { return std::make_unique<GaussianNoise>(sys); },
                                   small_spec(2, {10})),
               Error);
}

TEST(DecouplingPath, MatchesIteratedUpdate) {
  const auto sys = random_system(2, 3, 2);
  const auto sched = StepSchedule::polynomial(0.5, 0.6, 0.25, 0.75);
  const auto path = decoupling_path(sys, sched, {1, 5, 40});
  ASSERT_EQ(path.size(), 3u);
  EXPECT_EQ(path[0].norm(), 0.0);
  Matrix l = Matrix::Zero(2, 3);
  for (std::uint64_t t = 1; t < 40; ++t) {
    const auto s = sched.at(t);
    l = update_L(l, sys, s.alpha, s.gamma);
    if (t + 1 == 5) EXPECT_EQ(path[1], l);
  }
  EXPECT_EQ(path[2], l);
}

TEST(ParallelFor, CoversRangeAndRethrowsFirst) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, 8, [&](std::size_t i, unsigned) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  try {
    parallel_for(100, 4, [](std::size_t i, unsigned) {
      if (i == 30 || i == 70) throw Error(ErrorCode::InvalidArgument, std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("30"), std::string::npos);
  }
}
