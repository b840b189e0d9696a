#include "tsalab/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "tsalab/dynamics.hpp"

namespace tsalab {

void GaussianNoise::sample(const Vector&, const Vector&, Rng& rng, NoiseSample& out) {
  sample_noise(*sys_, rng, out, scratch_);
}

void CampaignSpec::validate() const {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "campaign: trials must be >= 1");
  if (checkpoints.empty()) throw Error(ErrorCode::InvalidArgument, "campaign: at least one checkpoint is required");
  if (checkpoints.front() < 1) throw Error(ErrorCode::InvalidArgument, "campaign: checkpoints must be >= 1");
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= checkpoints[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "campaign: checkpoints must be strictly increasing");
    }
  }
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "campaign: max_failure_fraction must lie in [0, 1]");
  }
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "campaign: workers must be >= 1");
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t, unsigned)>& fn) {
  if (count == 0) return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::size_t>(count, 1u << 16))));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t first_bad = count;
  std::exception_ptr first_error;
  auto body = [&](unsigned worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < first_bad) {
          first_bad = i;
          first_error = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<Matrix> decoupling_path(const TwoTimeScaleSystem& sys, const StepSchedule& sched,
                                    const std::vector<std::uint64_t>& at) {
  std::vector<Matrix> out;
  Matrix l = Matrix::Zero(sys.dx(), sys.dy());
  std::uint64_t t = 1;
  for (const auto n : at) {
    if (n < t) throw Error(ErrorCode::InvalidArgument, "decoupling_path: times must be strictly increasing");
    for (; t < n; ++t) {
      const auto s = sched.at(t);
      l = update_L(l, sys, s.alpha, s.gamma);
    }
    out.push_back(l);
  }
  return out;
}

namespace {

std::vector<StepSizes> step_table(const StepSchedule& sched, std::uint64_t horizon) {
  std::vector<StepSizes> table;
  table.reserve(horizon);
  for (std::uint64_t t = 1; t <= horizon; ++t) table.push_back(sched.at(t));
  return table;
}

struct TrialOutcome {
  bool failed = false;
  std::vector<TrialSnapshot> snaps;
};

// Runs one trajectory up to the last checkpoint, recording centred errors.
TrialOutcome run_trial(const TwoTimeScaleSystem& sys, const std::vector<StepSizes>& table,
                       const std::vector<std::uint64_t>& checkpoints, NoiseModel& noise, Rng& rng,
                       const CampaignSpec& spec, const std::vector<Matrix>* l_path) {
  TrialOutcome out;
  const Vector x0 = spec.x0.size() ? spec.x0 : Vector::Zero(sys.dx());
  const Vector y0 = spec.y0.size() ? spec.y0 : Vector::Zero(sys.dy());
  TrajectoryState st = init_trajectory(sys, x0, y0, false, spec.burn_in);
  NoiseSample ns;
  ns.w.resize(sys.dx());
  ns.v.resize(sys.dy());
  out.snaps.reserve(checkpoints.size());
  std::size_t k = 0;
  try {
    for (;;) {
      if (st.t == checkpoints[k]) {
        TrialSnapshot snap;
        snap.x_err = st.x - sys.x_star();
        snap.y_err = st.y - sys.y_star();
        snap.xbar_err = st.x_bar - sys.x_star();
        snap.ybar_err = st.y_bar - sys.y_star();
        if (l_path) {
          snap.x_hat = snap.x_err + sys.a_ff_inv_a_fs() * snap.y_err;
          snap.x_tilde = snap.x_hat + (*l_path)[k] * snap.y_err;
        }
        out.snaps.push_back(std::move(snap));
        if (++k == checkpoints.size()) break;
      }
      noise.sample(st.x, st.y, rng, ns);
      step(st, sys, table[st.t - 1], ns);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteIterate) throw;
    out.failed = true;
    out.snaps.clear();
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string idx_label(Eigen::Index i) { return std::to_string(i + 1); }
std::string idx_label(Eigen::Index i, Eigen::Index j) { return std::to_string(i + 1) + "_" + std::to_string(j + 1); }

class RowSink {
 public:
  RowSink(std::vector<StatRow>& rows, std::uint64_t n, std::uint64_t seed) : rows_(rows), n_(n), seed_(seed) {}

  void add(const std::string& stat, const std::string& coord, double value, double se) {
    rows_.push_back({n_, stat, coord, value, se});
  }
  std::uint64_t seed_for(const std::string& stat, const std::string& coord) const {
    return derive_seed(seed_, fnv1a(stat + "|" + coord));
  }

  // Mean and covariance of a vector statistic; covariance standard errors
  // from the fourth-moment formula.
  void moments(const std::string& prefix, const std::vector<Vector>& s) {
    const auto m = static_cast<double>(s.size());
    const Vector mean = empirical_mean(s);
    const Matrix cov = empirical_covariance(s);
    const Eigen::Index d = mean.size();
    for (Eigen::Index i = 0; i < d; ++i) add(prefix + "_mean", idx_label(i), mean(i), std::sqrt(cov(i, i) / m));
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        double mu4 = 0;
        for (const auto& v : s) {
          const double p = (v(i) - mean(i)) * (v(j) - mean(j));
          mu4 += p * p;
        }
        mu4 /= m;
        add(prefix + "_cov", idx_label(i, j), cov(i, j), std::sqrt(std::max(0.0, mu4 - cov(i, j) * cov(i, j)) / m));
      }
    }
  }

  void coordinate_std(const std::string& stat, const std::vector<Vector>& s) {
    const Eigen::Index d = s.front().size();
    std::vector<double> col(s.size());
    for (Eigen::Index i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s.size(); ++k) col[k] = s[k](i);
      const auto b = bootstrap(
          col.size(),
          [&](std::span<const std::size_t> idx) {
            double mean = 0;
            for (auto q : idx) mean += col[q];
            mean /= static_cast<double>(idx.size());
            double ss = 0;
            for (auto q : idx) ss += (col[q] - mean) * (col[q] - mean);
            return std::sqrt(ss / static_cast<double>(idx.size() - 1));
          },
          seed_for(stat, idx_label(i)));
      add(stat, idx_label(i), b.value, b.std_error);
    }
  }

  void w1(const std::string& stat, const std::vector<Vector>& s, const Matrix& limit_cov,
          const std::vector<double>& reference_norms) {
    const Eigen::Index d = s.front().size();
    std::vector<double> col(s.size()), buf;
    for (Eigen::Index i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < s.size(); ++k) col[k] = s[k](i);
      const double sigma = std::sqrt(std::max(0.0, limit_cov(i, i)));
      const auto b = bootstrap(
          col.size(),
          [&](std::span<const std::size_t> idx) {
            buf.resize(idx.size());
            for (std::size_t q = 0; q < idx.size(); ++q) buf[q] = col[idx[q]];
            return empirical_w1_to_gaussian(buf, sigma);
          },
          seed_for(stat, idx_label(i)));
      add(stat, idx_label(i), b.value, b.std_error);
    }
    std::vector<double> norms(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) norms[k] = s[k].norm();
    const auto b = bootstrap(
        norms.size(),
        [&](std::span<const std::size_t> idx) {
          buf.resize(idx.size());
          for (std::size_t q = 0; q < idx.size(); ++q) buf[q] = norms[idx[q]];
          return empirical_w1_two_sample(buf, reference_norms);
        },
        seed_for(stat, "norm"));
    add(stat, "norm", b.value, b.std_error);
  }

  void error_norm(const std::string& stat, const std::vector<Vector>& s) {
    const auto e = expected_error(s, seed_for(stat, "norm"));
    add(stat, "norm", e.mean_norm, e.std_error);
  }

 private:
  std::vector<StatRow>& rows_;
  std::uint64_t n_;
  std::uint64_t seed_;
};

std::vector<double> reference_norm_sample(const Matrix& cov, double scale, std::uint64_t seed,
                                          std::size_t draws = 100000) {
  const Matrix s = psd_sqrt(cov, scale);
  Rng rng(seed);
  Vector z(cov.rows());
  std::vector<double> out(draws);
  for (auto& v : out) {
    rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
    v = (s * z).norm();
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<double> scaled_slow_coordinate(const CheckpointData& cp, std::size_t coord, bool last_iterate) {
  std::vector<double> out;
  out.reserve(cp.trials.size());
  const double scale = std::sqrt(static_cast<double>(cp.n));
  for (const auto& t : cp.trials) {
    const Vector& v = last_iterate ? t.y_err : t.ybar_err;
    if (static_cast<Eigen::Index>(coord) >= v.size()) throw Error(ErrorCode::DimensionMismatch, "coordinate out of range");
    out.push_back(scale * v(static_cast<Eigen::Index>(coord)));
  }
  return out;
}

void summarize_campaign(MonteCarloReport& report, const TwoTimeScaleSystem& sys, const CovariancePack& pack,
                        const StepSchedule& sched, const CampaignSpec& spec) {
  report.rows.clear();
  const double ref_scale = std::max(spectral_norm(pack.Gamma_tilde_ff), spectral_norm(pack.Gamma_tilde_ss));
  const auto ref_fast = reference_norm_sample(pack.Gamma_tilde_ff, ref_scale, derive_seed(spec.seed, 0xfa57));
  const auto ref_slow = reference_norm_sample(pack.Gamma_tilde_ss, ref_scale, derive_seed(spec.seed, 0x5104));
  for (std::size_t c = 0; c < report.checkpoints.size(); ++c) {
    const auto& cp = report.checkpoints[c];
    RowSink sink(report.rows, cp.n, derive_seed(spec.seed, 0xb0075ULL + c));
    const auto m = cp.trials.size();
    sink.add("valid_trials", "all", static_cast<double>(m), 0.0);
    if (m < 2) continue;
    const double rn = std::sqrt(static_cast<double>(cp.n));
    const auto s = sched.at(cp.n);

    if (spec.pr_average) {
      std::vector<Vector> fast(m), slow(m), raw_fast(m), raw_slow(m);
      for (std::size_t k = 0; k < m; ++k) {
        raw_fast[k] = rn * cp.trials[k].xbar_err;
        raw_slow[k] = rn * cp.trials[k].ybar_err;
        fast[k] = pack.G * raw_fast[k];
        slow[k] = pack.Delta * raw_slow[k];
      }
      sink.moments("pr_fast", fast);
      sink.moments("pr_slow", slow);
      std::vector<Vector> joint(m);
      for (std::size_t k = 0; k < m; ++k) {
        joint[k].resize(sys.dim());
        joint[k] << cp.trials[k].xbar_err, cp.trials[k].ybar_err;
      }
      sink.error_norm("pr_error", joint);
      sink.error_norm("pr_fast_error", fast);
      sink.error_norm("pr_slow_error", slow);
      sink.w1("pr_fast_w1", fast, pack.Gamma_tilde_ff, ref_fast);
      sink.w1("pr_slow_w1", slow, pack.Gamma_tilde_ss, ref_slow);
      sink.coordinate_std("raw_pr_fast_std", raw_fast);
      sink.coordinate_std("raw_pr_slow_std", raw_slow);
    }
    if (spec.last_iterate) {
      std::vector<Vector> fast(m), slow(m), raw_fast(m), raw_slow(m);
      for (std::size_t k = 0; k < m; ++k) {
        fast[k] = cp.trials[k].x_err / std::sqrt(s.alpha);
        slow[k] = cp.trials[k].y_err / std::sqrt(s.gamma);
        raw_fast[k] = rn * cp.trials[k].x_err;
        raw_slow[k] = rn * cp.trials[k].y_err;
      }
      sink.moments("last_fast", fast);
      sink.moments("last_slow", slow);
      sink.coordinate_std("raw_last_fast_std", raw_fast);
      sink.coordinate_std("raw_last_slow_std", raw_slow);
    }
    if (spec.diagnostics) {
      std::vector<Vector> xt(m), xh(m), yh(m);
      for (std::size_t k = 0; k < m; ++k) {
        xt[k] = cp.trials[k].x_tilde;
        xh[k] = cp.trials[k].x_hat;
        yh[k] = cp.trials[k].y_err;
      }
      const SpdMatrix p_ff = pack.p_ff();
      const SpdMatrix p_d = pack.p_delta();
      const auto dev = [&](const std::vector<Vector>& v, double step, const Matrix& sigma, const SpdMatrix& p,
                           const std::string& name) {
        const auto b = bootstrap(
            m,
            [&](std::span<const std::size_t> idx) {
              return weighted_norm(empirical_second_moment(v, idx) - step * sigma, p) / step;
            },
            sink.seed_for(name, "all"));
        sink.add(name, "all", b.value, b.std_error);
        // The plug-in norm is biased upwards by the sampling noise in the second moment.
        sink.add(name + "_bc", "all", b.bias_corrected(), b.std_error);
      };
      dev(xt, s.alpha, pack.Sigma_ff, p_ff, "lemma1_delta_x_tilde_over_alpha");
      dev(yh, s.gamma, pack.Sigma_ss, p_d, "lemma1_delta_y_over_gamma");
      dev(xh, s.alpha, pack.Sigma_ff, p_ff, "lemma1_delta_x_over_alpha");
    }
  }
}

MonteCarloReport run_campaign(const TwoTimeScaleSystem& sys, const StepSchedule& sched, const NoiseFactory& noise,
                              const CampaignSpec& spec) {
  spec.validate();
  if ((spec.x0.size() && spec.x0.size() != sys.dx()) || (spec.y0.size() && spec.y0.size() != sys.dy())) {
    throw Error(ErrorCode::DimensionMismatch, "campaign: initial point does not match the system");
  }
  const CovariancePack pack = compute_pack(sys);
  const auto table = step_table(sched, spec.horizon());
  std::vector<Matrix> l_path;
  if (spec.diagnostics) l_path = decoupling_path(sys, sched, spec.checkpoints);

  std::vector<std::unique_ptr<NoiseModel>> models;
  const unsigned workers = std::max(1u, spec.workers);
  for (unsigned w = 0; w < workers; ++w) models.push_back(noise());

  std::vector<TrialOutcome> outcomes(spec.trials);
  parallel_for(spec.trials, workers, [&](std::size_t k, unsigned w) {
    Rng rng = Rng::stream(spec.seed, k);
    outcomes[k] = run_trial(sys, table, spec.checkpoints, *models[w], rng, spec,
                            spec.diagnostics ? &l_path : nullptr);
  });

  MonteCarloReport report;
  report.seed = spec.seed;
  report.trials_requested = spec.trials;
  report.schedule_echo = sched.describe();
  report.noise_model = models.front()->name();
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (outcomes[k].failed) report.failed_trial_ids.push_back(k);
  }
  report.trials_failed = report.failed_trial_ids.size();
  if (static_cast<double>(report.trials_failed) > spec.max_failure_fraction * static_cast<double>(spec.trials)) {
    throw Error(ErrorCode::TooManyFailures, std::to_string(report.trials_failed) + " of " +
                                                std::to_string(spec.trials) + " trials produced non-finite iterates");
  }
  for (std::size_t c = 0; c < spec.checkpoints.size(); ++c) {
    CheckpointData cp;
    cp.n = spec.checkpoints[c];
    cp.steps = sched.at(cp.n);
    if (spec.diagnostics) cp.L = l_path[c];
    cp.trials.reserve(outcomes.size());
    for (auto& o : outcomes) {
      if (!o.failed) cp.trials.push_back(std::move(o.snaps[c]));
    }
    report.checkpoints.push_back(std::move(cp));
  }
  summarize_campaign(report, sys, pack, sched, spec);
  return report;
}

MonteCarloReport run_campaign(const TwoTimeScaleSystem& sys, const StepSchedule& sched, const CampaignSpec& spec) {
  return run_campaign(sys, sched, [&sys] { return std::make_unique<GaussianNoise>(sys); }, spec);
}

const StatRow& MonteCarloReport::find(std::uint64_t n, const std::string& statistic,
                                      const std::string& coordinate) const {
  for (const auto& r : rows) {
    if (r.n == n && r.statistic == statistic && r.coordinate == coordinate) return r;
  }
  throw Error(ErrorCode::InvalidArgument,
              "no row for n=" + std::to_string(n) + " statistic=" + statistic + " coordinate=" + coordinate);
}

bool MonteCarloReport::has(std::uint64_t n, const std::string& statistic, const std::string& coordinate) const {
  return std::any_of(rows.begin(), rows.end(), [&](const StatRow& r) {
    return r.n == n && r.statistic == statistic && r.coordinate == coordinate;
  });
}

const ComparisonRow& ComparisonTable::find(std::size_t schedule_id, std::uint64_t n, const std::string& which) const {
  for (const auto& r : rows) {
    if (r.schedule_id == schedule_id && r.n == n && r.which == which) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "no comparison row for schedule " + std::to_string(schedule_id));
}

ComparisonTable schedule_comparison(const TwoTimeScaleSystem& sys, const std::vector<StepSchedule>& schedules,
                                    const NoiseFactory& noise, const CampaignSpec& spec,
                                    std::optional<std::size_t> reference) {
  spec.validate();
  if (schedules.size() < 2) throw Error(ErrorCode::InvalidArgument, "schedule_comparison needs at least 2 schedules");
  const std::size_t ref = reference.value_or(schedules.size() - 1);
  if (ref >= schedules.size()) throw Error(ErrorCode::InvalidArgument, "reference schedule out of range");

  const unsigned workers = std::max(1u, spec.workers);
  std::vector<std::unique_ptr<NoiseModel>> models;
  for (unsigned w = 0; w < workers; ++w) models.push_back(noise());

  const std::size_t ns = schedules.size();
  const std::size_t nc = spec.checkpoints.size();
  // errors[s][trial][checkpoint] = (fast, slow)
  std::vector<std::vector<std::vector<std::pair<double, double>>>> errors(ns);
  std::vector<std::vector<char>> failed(ns, std::vector<char>(spec.trials, 0));
  for (std::size_t s = 0; s < ns; ++s) {
    const auto table = step_table(schedules[s], spec.horizon());
    errors[s].assign(spec.trials, {});
    parallel_for(spec.trials, workers, [&](std::size_t k, unsigned w) {
      Rng rng = Rng::stream(spec.seed, k);
      auto o = run_trial(sys, table, spec.checkpoints, *models[w], rng, spec, nullptr);
      if (o.failed) {
        failed[s][k] = 1;
        return;
      }
      auto& e = errors[s][k];
      e.reserve(nc);
      for (const auto& snap : o.snaps) e.emplace_back(snap.xbar_err.norm(), snap.ybar_err.norm());
    });
  }

  ComparisonTable table;
  table.reference_id = ref;
  table.trials = spec.trials;
  table.seed = spec.seed;
  for (const auto& s : schedules) table.schedules.push_back(s.describe());
  std::vector<std::size_t> valid;
  for (std::size_t k = 0; k < spec.trials; ++k) {
    bool ok = true;
    for (std::size_t s = 0; s < ns; ++s) ok = ok && !failed[s][k];
    if (ok) valid.push_back(k);
  }
  for (std::size_t s = 0; s < ns; ++s) {
    const auto count = static_cast<std::uint64_t>(std::count(failed[s].begin(), failed[s].end(), 1));
    table.failed.push_back(count);
    if (static_cast<double>(count) > spec.max_failure_fraction * static_cast<double>(spec.trials)) {
      throw Error(ErrorCode::TooManyFailures, "schedule " + std::to_string(s) + ": " + std::to_string(count) +
                                                  " trials produced non-finite iterates");
    }
  }
  if (valid.size() < 2) throw Error(ErrorCode::TooManyFailures, "fewer than 2 trials valid under every schedule");

  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t c = 0; c < nc; ++c) {
      for (int which = 0; which < 2; ++which) {
        const auto pick = [&](std::size_t sched, std::size_t k) {
          const auto& p = errors[sched][k][c];
          return which == 0 ? p.first : p.second;
        };
        std::vector<double> vals, diffs;
        for (auto k : valid) {
          vals.push_back(pick(s, k));
          diffs.push_back(pick(s, k) - pick(ref, k));
        }
        // Every schedule shares the resampling stream of its checkpoint, so
        // identical inputs give identical intervals.
        const std::string cell = std::to_string(c) + "|" + std::to_string(which);
        const std::string tag = std::to_string(s) + "|" + cell;
        const auto b = bootstrap_mean(vals, derive_seed(spec.seed, fnv1a("cmp|" + cell)));
        ComparisonRow row;
        row.schedule_id = s;
        row.schedule = table.schedules[s];
        row.n = spec.checkpoints[c];
        row.which = which == 0 ? "fast" : "slow";
        row.mean_error = b.value;
        row.ci_lo = b.ci_lo;
        row.ci_hi = b.ci_hi;
        row.std_error = b.std_error;
        if (s != ref) {
          const auto d = bootstrap_mean(diffs, derive_seed(spec.seed, fnv1a("pair|" + tag)));
          row.paired_diff = d.value;
          row.paired_ci_lo = d.ci_lo;
          row.paired_ci_hi = d.ci_hi;
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

void write_checkpoints_csv(std::ostream& out, const MonteCarloReport& report) {
  out << "n,statistic,coordinate,value,stderr\n";
  for (const auto& r : report.rows) {
    out << r.n << ',' << r.statistic << ',' << r.coordinate << ',' << format_double(r.value) << ','
        << format_double(r.std_error) << '\n';
  }
}

void write_density_csv(std::ostream& out, const MonteCarloReport& report, bool last_iterate, std::size_t bins) {
  out << "checkpoint,grid_x,kde,hist\n";
  for (const auto& cp : report.checkpoints) {
    if (cp.trials.empty()) continue;
    const auto d = density_export(scaled_slow_coordinate(cp, 0, last_iterate), bins);
    for (std::size_t g = 0; g < d.grid.size(); ++g) {
      out << cp.n << ',' << format_double(d.grid[g]) << ',' << format_double(d.kde[g]) << ','
          << format_double(d.hist_at(d.grid[g])) << '\n';
    }
  }
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out << "schedule_id,n,which,mean_error,ci_lo,ci_hi\n";
  for (const auto& r : table.rows) {
    out << r.schedule_id << ',' << r.n << ',' << r.which << ',' << format_double(r.mean_error) << ','
        << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << '\n';
  }
}

nlohmann::json report_to_json(const MonteCarloReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["trials_requested"] = report.trials_requested;
  j["trials_failed"] = report.trials_failed;
  j["failed_trial_ids"] = report.failed_trial_ids;
  j["schedule"] = report.schedule_echo;
  j["noise_model"] = report.noise_model;
  j["code_version"] = TSALAB_VERSION;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"n", r.n}, {"statistic", r.statistic}, {"coordinate", r.coordinate}, {"value", r.value},
                    {"stderr", r.std_error}});
  }
  j["checkpoints"] = rows;
  return j;
}

nlohmann::json comparison_to_json(const ComparisonTable& table) {
  nlohmann::json j;
  j["seed"] = table.seed;
  j["trials"] = table.trials;
  j["reference_id"] = table.reference_id;
  j["schedules"] = table.schedules;
  j["failed"] = table.failed;
  j["code_version"] = TSALAB_VERSION;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"schedule_id", r.schedule_id}, {"n", r.n},         {"which", r.which},
                          {"mean_error", r.mean_error},   {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi},
                          {"stderr", r.std_error}};
    if (r.paired_diff) {
      row["paired_diff"] = *r.paired_diff;
      row["paired_ci_lo"] = *r.paired_ci_lo;
      row["paired_ci_hi"] = *r.paired_ci_hi;
    }
    rows.push_back(std::move(row));
  }
  j["comparison"] = rows;
  return j;
}

}  // namespace tsalab
