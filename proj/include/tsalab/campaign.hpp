#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tsalab/rng.hpp"
#include "tsalab/schedule.hpp"
#include "tsalab/stats.hpp"
#include "tsalab/system.hpp"
#include "tsalab/theory.hpp"

namespace tsalab {

/// Source of (W_t, V_t). One instance is used by one thread at a time; the
/// campaign clones a model per worker.
class NoiseModel {
 public:
  virtual ~NoiseModel() = default;
  /// Noise for the step leaving (x, y); additive models ignore the iterate.
  virtual void sample(const Vector& x, const Vector& y, Rng& rng, NoiseSample& out) = 0;
  virtual std::unique_ptr<NoiseModel> clone() const = 0;
  virtual std::string name() const = 0;
};

/// noise_mean + Gamma^{1/2} z, z standard normal.
class GaussianNoise final : public NoiseModel {
 public:
  explicit GaussianNoise(const TwoTimeScaleSystem& sys) : sys_(&sys) {}
  void sample(const Vector& x, const Vector& y, Rng& rng, NoiseSample& out) override;
  std::unique_ptr<NoiseModel> clone() const override { return std::make_unique<GaussianNoise>(*sys_); }
  std::string name() const override { return "gaussian"; }

 private:
  const TwoTimeScaleSystem* sys_;
  Vector scratch_;
};

struct CampaignSpec {
  std::uint64_t trials = 2000;
  std::vector<std::uint64_t> checkpoints{1000, 10000, 100000};
  std::uint64_t seed = 0;
  bool last_iterate = true;
  bool pr_average = true;
  /// Adds x_hat, x_tilde and the deviation statistics. The decoupling
  /// sequence L_t does not depend on the noise, so it is computed once.
  bool diagnostics = false;
  /// Initial point; zero when empty.
  Vector x0, y0;
  std::uint64_t burn_in = 0;
  unsigned workers = 1;
  double max_failure_fraction = 0.01;
  /// Number of histogram bins for density exports.
  std::size_t density_bins = 50;

  std::uint64_t horizon() const { return checkpoints.empty() ? 0 : checkpoints.back(); }
  /// Throws InvalidArgument unless trials >= 1 and checkpoints are strictly increasing and >= 1.
  void validate() const;
};

/// Per-trial values at one checkpoint, all centred at the solution.
struct TrialSnapshot {
  Vector x_err, y_err;        // x_n - x*, y_n - y*
  Vector xbar_err, ybar_err;  // xbar_n - x*, ybar_n - y*
  Vector x_hat, x_tilde;      // diagnostics only
};

struct StatRow {
  std::uint64_t n = 0;
  std::string statistic;
  std::string coordinate;
  double value = 0;
  double std_error = 0;
};

struct CheckpointData {
  std::uint64_t n = 0;
  StepSizes steps{0, 0};
  std::vector<TrialSnapshot> trials;  // valid trials, ordered by trial index
  Matrix L;                           // L_n when diagnostics are on
};

struct MonteCarloReport {
  std::uint64_t seed = 0;
  std::uint64_t trials_requested = 0;
  std::uint64_t trials_failed = 0;
  std::vector<std::uint64_t> failed_trial_ids;
  std::string schedule_echo;
  std::string noise_model;
  std::vector<CheckpointData> checkpoints;
  std::vector<StatRow> rows;

  /// Throws InvalidArgument when the row is missing.
  const StatRow& find(std::uint64_t n, const std::string& statistic, const std::string& coordinate) const;
  bool has(std::uint64_t n, const std::string& statistic, const std::string& coordinate) const;
};

using NoiseFactory = std::function<std::unique_ptr<NoiseModel>()>;

/// Runs `spec.trials` trajectories. Trial k draws all randomness from
/// Rng::stream(spec.seed, k); results are merged by trial index, so the
/// report does not depend on the worker count.
/// Throws TooManyFailures when more than max_failure_fraction of the trials
/// hit NonFiniteIterate.
MonteCarloReport run_campaign(const TwoTimeScaleSystem& sys, const StepSchedule& sched, const NoiseFactory& noise,
                              const CampaignSpec& spec);

/// Convenience overload with Gaussian noise from the system.
MonteCarloReport run_campaign(const TwoTimeScaleSystem& sys, const StepSchedule& sched, const CampaignSpec& spec);

/// Fills report.rows from the stored trial snapshots. Called by run_campaign;
/// exposed for tests.
void summarize_campaign(MonteCarloReport& report, const TwoTimeScaleSystem& sys, const CovariancePack& pack,
                        const StepSchedule& sched, const CampaignSpec& spec);

/// Per-checkpoint sample of the first slow coordinate, sqrt(n)(ybar_{n,1} - y_1*)
/// (or the last iterate when `last_iterate` is set).
std::vector<double> scaled_slow_coordinate(const CheckpointData& cp, std::size_t coord, bool last_iterate);

struct ComparisonRow {
  std::size_t schedule_id = 0;
  std::string schedule;
  std::uint64_t n = 0;
  std::string which;  // fast | slow
  double mean_error = 0;
  double ci_lo = 0, ci_hi = 0;
  double std_error = 0;
  // Paired difference (this schedule - reference) over common random numbers.
  std::optional<double> paired_diff;
  std::optional<double> paired_ci_lo, paired_ci_hi;
};

struct ComparisonTable {
  std::size_t reference_id = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> schedules;
  std::vector<std::uint64_t> failed;  // per schedule
  std::vector<ComparisonRow> rows;

  const ComparisonRow& find(std::size_t schedule_id, std::uint64_t n, const std::string& which) const;
};

/// Runs every schedule on the same per-trial random streams and tabulates
/// mean ||xbar_n - x*||, ||ybar_n - y*|| with bootstrap CIs and paired
/// differences against the reference schedule (default: the last).
ComparisonTable schedule_comparison(const TwoTimeScaleSystem& sys, const std::vector<StepSchedule>& schedules,
                                    const NoiseFactory& noise, const CampaignSpec& spec,
                                    std::optional<std::size_t> reference = std::nullopt);

/// Deterministic sequence L_1 = 0, L_{t+1} = update_L(L_t, alpha_t, gamma_t);
/// returns L_n for each requested n (strictly increasing).
std::vector<Matrix> decoupling_path(const TwoTimeScaleSystem& sys, const StepSchedule& sched,
                                    const std::vector<std::uint64_t>& at);

void write_checkpoints_csv(std::ostream& out, const MonteCarloReport& report);
/// checkpoint, grid_x, kde, hist for the first slow coordinate.
void write_density_csv(std::ostream& out, const MonteCarloReport& report, bool last_iterate, std::size_t bins);
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

nlohmann::json report_to_json(const MonteCarloReport& report);
nlohmann::json comparison_to_json(const ComparisonTable& table);

/// Runs fn(i) for i in [0, count) on `workers` threads. Exceptions are
/// captured and the first one (by index) is rethrown after the join.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t, unsigned)>& fn);

}  // namespace tsalab
