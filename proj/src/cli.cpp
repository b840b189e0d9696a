#include "tsalab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsalab/campaign.hpp"
#include "tsalab/dynamics.hpp"
#include "tsalab/error.hpp"
#include "tsalab/keyvalue.hpp"
#include "tsalab/schedule.hpp"
#include "tsalab/system.hpp"
#include "tsalab/tdc.hpp"
#include "tsalab/theory.hpp"

namespace tsalab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kCommands = {"gen-system", "theory", "simulate", "clt",
                                            "compare-schedules", "tdc", "bounds"};
const std::vector<std::string> kNamespaces = {"system.", "schedule.", "campaign.", "tdc.",
                                              "bounds.", "compare.", "simulate.", "theory."};
const std::vector<std::string> kTopLevelKeys = {"problem", "seed", "trace_stride"};

struct Context {
  std::string command;
  fs::path config_path;
  std::string config_text;
  KeyValueFile cfg;
  fs::path out_dir;
  unsigned workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::uint64_t> trace_stride;
  std::ostream* log = nullptr;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSchedule:
    case ErrorCode::InvalidTime:
    case ErrorCode::OutsideTheta:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::EmptyInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DiagnosticsDisabled:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

void check_keys(const KeyValueFile& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    const bool top = std::find(kTopLevelKeys.begin(), kTopLevelKeys.end(), key) != kTopLevelKeys.end();
    const bool spaced = std::any_of(kNamespaces.begin(), kNamespaces.end(),
                                    [&](const std::string& ns) { return key.rfind(ns, 0) == 0; });
    if (!top && !spaced) throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
  }
}

fs::path resolve_input(const Context& ctx, const std::string& value) {
  fs::path p(value);
  if (p.is_relative()) p = ctx.config_path.parent_path() / p;
  if (!fs::exists(p)) throw Error(ErrorCode::IoError, "input file not found: " + p.string());
  return p;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  body(out);
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

std::uint64_t run_seed(const Context& ctx) {
  if (ctx.seed_override) return *ctx.seed_override;
  if (ctx.cfg.has("campaign.seed")) return ctx.cfg.get_uint64_or("campaign.seed", 0);
  return ctx.cfg.get_uint64_or("seed", 0);
}

json provenance(const Context& ctx) {
  json j;
  j["tool"] = "tsalab";
  j["version"] = TSALAB_VERSION;
  j["command"] = ctx.command;
  j["seed"] = run_seed(ctx);
  j["config"] = ctx.config_text;
  return j;
}

// Problem instance: either a synthetic linear system with Gaussian noise or a
// TDC instance with its sample-based noise.
struct Problem {
  std::string kind;
  std::unique_ptr<TwoTimeScaleSystem> sys;
  std::optional<MdpBundle> mdp;
  std::optional<TdcBuild> tdc;
  TdcNoiseMode mode = TdcNoiseMode::RealisticMultiplicative;

  NoiseFactory factory() const {
    if (kind == "tdc") {
      const MdpBundle* b = &*mdp;
      const TwoTimeScaleSystem* s = sys.get();
      const TdcNoiseMode m = mode;
      return [b, s, m]() -> std::unique_ptr<NoiseModel> {
        return std::make_unique<TdcNoise>(b->mdp, b->features, b->behavior, b->target, *s, m);
      };
    }
    const TwoTimeScaleSystem* s = sys.get();
    return [s]() -> std::unique_ptr<NoiseModel> { return std::make_unique<GaussianNoise>(*s); };
  }
};

TwoTimeScaleSystem synthetic_system(const Context& ctx) {
  const KeyValueFile& cfg = ctx.cfg;
  if (cfg.has("system.file")) {
    TwoTimeScaleSystem sys = load_system(resolve_input(ctx, cfg.get("system.file")));
    if (cfg.get_bool_or("system.calibrate", false))
      sys = calibrate_noise_identity_pr(sys, cfg.get_double_or("system.fast_noise_scale", 1.0));
    return sys;
  }
  const std::int64_t dx = cfg.get_int_or("system.dx", 5);
  const std::int64_t dy = cfg.get_int_or("system.dy", 5);
  if (dx < 1 || dy < 1) throw Error(ErrorCode::InvalidArgument, "system.dx and system.dy must be >= 1");
  SpectrumRange range{cfg.get_double_or("system.spectrum_low", 0.5), cfg.get_double_or("system.spectrum_high", 2.0)};
  TwoTimeScaleSystem sys = random_system(dx, dy, cfg.get_uint64_or("system.seed", 0), range,
                                         cfg.get_bool_or("system.zero_cross_blocks", false));
  if (cfg.get_bool_or("system.calibrate", false))
    sys = calibrate_noise_identity_pr(sys, cfg.get_double_or("system.fast_noise_scale", 1.0));
  return sys;
}

Policy make_policy(const std::string& kind, std::size_t s, std::size_t a, std::uint64_t seed) {
  if (kind == "uniform") return uniform_policy(s, a);
  if (kind == "random") return random_policy(s, a, seed);
  throw Error(ErrorCode::ParseError, "policy must be 'uniform' or 'random', got '" + kind + "'");
}

MdpBundle tdc_bundle(const Context& ctx) {
  const KeyValueFile& cfg = ctx.cfg;
  if (cfg.has("tdc.file")) return load_mdp(resolve_input(ctx, cfg.get("tdc.file")));
  const std::int64_t n_states = cfg.get_int_or("tdc.n_states", 20);
  const std::int64_t n_actions = cfg.get_int_or("tdc.n_actions", 2);
  const std::int64_t d = cfg.get_int_or("tdc.d", 10);
  if (n_states < 1 || n_actions < 1 || d < 1 || d > n_states)
    throw Error(ErrorCode::InvalidArgument, "tdc: need n_states >= d >= 1 and n_actions >= 1");
  const std::uint64_t seed = cfg.get_uint64_or("tdc.seed", 0);
  RandomMdp r = random_mdp(static_cast<std::size_t>(n_states), static_cast<std::size_t>(n_actions),
                           static_cast<std::size_t>(d), cfg.get_double_or("tdc.discount", 0.9), seed);
  MdpBundle b;
  b.mdp = std::move(r.mdp);
  b.features = std::move(r.features);
  b.behavior = make_policy(cfg.get_or("tdc.behavior", "uniform"), b.mdp.n_states, b.mdp.n_actions,
                           derive_seed(seed, 1));
  b.target = make_policy(cfg.get_or("tdc.target", "random"), b.mdp.n_states, b.mdp.n_actions, derive_seed(seed, 2));
  return b;
}

// Schedule comparisons default to the multiplicative mode (plain TDC); every
// other command defaults to the additive mode covered by the theory.
TdcNoiseMode tdc_mode(const KeyValueFile& cfg, const std::string& fallback) {
  const std::string m = cfg.get_or("tdc.noise_mode", fallback);
  if (m == "multiplicative") return TdcNoiseMode::RealisticMultiplicative;
  if (m == "additive") return TdcNoiseMode::LinearizedAdditive;
  throw Error(ErrorCode::ParseError, "tdc.noise_mode must be 'multiplicative' or 'additive'");
}

Problem make_problem(const Context& ctx, const std::string& default_kind = "synthetic") {
  Problem p;
  p.kind = ctx.cfg.get_or("problem", default_kind);
  if (p.kind == "synthetic") {
    p.sys = std::make_unique<TwoTimeScaleSystem>(synthetic_system(ctx));
  } else if (p.kind == "tdc") {
    p.mdp = tdc_bundle(ctx);
    p.tdc = build_tdc_system(p.mdp->mdp, p.mdp->features, p.mdp->behavior, p.mdp->target);
    p.sys = std::make_unique<TwoTimeScaleSystem>(p.tdc->system);
    p.mode = tdc_mode(ctx.cfg, ctx.command == "compare-schedules" ? "multiplicative" : "additive");
    for (const auto& w : p.tdc->warnings) *ctx.log << "warning: " << w << '\n';
  } else {
    throw Error(ErrorCode::ParseError, "problem must be 'synthetic' or 'tdc', got '" + p.kind + "'");
  }
  return p;
}

Vector optional_vector(const KeyValueFile& cfg, const std::string& key, Eigen::Index size) {
  if (!cfg.has(key)) return Vector();
  return cfg.get_vector(key, size);
}

CampaignSpec campaign_spec(const Context& ctx, const TwoTimeScaleSystem& sys) {
  const KeyValueFile& cfg = ctx.cfg;
  CampaignSpec spec;
  const std::int64_t trials = cfg.get_int_or("campaign.trials", 2000);
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "campaign.trials must be >= 1");
  spec.trials = static_cast<std::uint64_t>(trials);
  if (cfg.has("campaign.checkpoints")) {
    spec.checkpoints.clear();
    for (std::int64_t v : cfg.get_ints("campaign.checkpoints")) {
      if (v < 1) throw Error(ErrorCode::InvalidArgument, "campaign.checkpoints must be >= 1");
      spec.checkpoints.push_back(static_cast<std::uint64_t>(v));
    }
  }
  spec.seed = run_seed(ctx);
  spec.diagnostics = cfg.get_bool_or("campaign.diagnostics", false);
  spec.burn_in = cfg.get_uint64_or("campaign.burn_in", 0);
  spec.max_failure_fraction = cfg.get_double_or("campaign.max_failure_fraction", 0.01);
  const std::int64_t bins = cfg.get_int_or("campaign.density_bins", 50);
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "campaign.density_bins must be >= 1");
  spec.density_bins = static_cast<std::size_t>(bins);
  spec.x0 = optional_vector(cfg, "campaign.x0", sys.dx());
  spec.y0 = optional_vector(cfg, "campaign.y0", sys.dy());
  spec.workers = ctx.workers;
  spec.validate();
  return spec;
}

json problem_json(const Problem& p) {
  json j;
  j["kind"] = p.kind;
  j["dx"] = p.sys->dx();
  j["dy"] = p.sys->dy();
  if (p.kind == "tdc") {
    j["noise_mode"] = p.mode == TdcNoiseMode::RealisticMultiplicative ? "multiplicative" : "additive";
    j["fast_abscissa"] = p.tdc->fast_abscissa;
    j["schur_abscissa"] = p.tdc->schur_abscissa;
    j["warnings"] = p.tdc->warnings;
  } else if (p.sys->seed()) {
    j["system_seed"] = *p.sys->seed();
  }
  return j;
}

json targets_json(const Corollary1Targets& t) {
  return json{{"fast", {{"mean", t.fast.mean}, {"stderr", t.fast.std_error}}},
              {"slow", {{"mean", t.slow.mean}, {"stderr", t.slow.std_error}}}};
}

int cmd_gen_system(const Context& ctx) {
  const TwoTimeScaleSystem sys = synthetic_system(ctx);
  save_system(sys, ctx.out_dir / "system.txt");
  const CovariancePack pack = compute_pack(sys);
  json j = provenance(ctx);
  j["pack"] = pack_to_json(pack);
  j["x_star"] = matrix_to_json(sys.x_star());
  j["y_star"] = matrix_to_json(sys.y_star());
  write_json(ctx.out_dir / "theory.json", j);
  return kExitOk;
}

int cmd_theory(const Context& ctx) {
  const Problem p = make_problem(ctx);
  const CovariancePack pack = compute_pack(*p.sys);
  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  j["pack"] = pack_to_json(pack);
  const OracleCovariance oracle = oracle_covariance(pack, *p.sys);
  j["oracle"] = {{"Sigma_ff_star", matrix_to_json(oracle.Sigma_ff_star)},
                 {"Sigma_ss_star", matrix_to_json(oracle.Sigma_ss_star)}};
  const std::uint64_t draws = ctx.cfg.get_uint64_or("theory.draws", 1000000);
  j["corollary1_targets"] = targets_json(corollary1_targets(pack, draws, derive_seed(run_seed(ctx), 0xC0)));
  if (ctx.cfg.has("schedule.kind")) {
    const StepSchedule sched = schedule_from_keyvalue(ctx.cfg, "schedule.");
    j["schedule"] = sched.describe();
    j["timescale_gap_limit"] = timescale_gap_limit(sched);
  }
  write_json(ctx.out_dir / "theory.json", j);
  return kExitOk;
}

int cmd_simulate(const Context& ctx) {
  const Problem p = make_problem(ctx);
  const TwoTimeScaleSystem& sys = *p.sys;
  const StepSchedule sched = schedule_from_keyvalue(ctx.cfg, "schedule.");
  const std::int64_t steps = ctx.cfg.get_int_or("simulate.steps", 10000);
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "simulate.steps must be >= 1");
  std::uint64_t stride = ctx.trace_stride.value_or(ctx.cfg.get_uint64_or("trace_stride", 0));
  const bool diagnostics = ctx.cfg.get_bool_or("simulate.diagnostics", true);

  Vector x0 = optional_vector(ctx.cfg, "campaign.x0", sys.dx());
  Vector y0 = optional_vector(ctx.cfg, "campaign.y0", sys.dy());
  if (x0.size() == 0) x0 = Vector::Zero(sys.dx());
  if (y0.size() == 0) y0 = Vector::Zero(sys.dy());
  TrajectoryState state = init_trajectory(sys, x0, y0, diagnostics, ctx.cfg.get_uint64_or("campaign.burn_in", 0));

  std::unique_ptr<NoiseModel> noise = p.factory()();
  Rng rng = Rng::stream(run_seed(ctx), 0);
  NoiseSample sample;

  std::ofstream trace;
  if (stride > 0) {
    trace.open(ctx.out_dir / "trace.csv", std::ios::binary | std::ios::trunc);
    if (!trace) throw Error(ErrorCode::IoError, "cannot open trace.csv");
    write_trace_header(trace, sys.dx(), sys.dy());
    write_trace_row(trace, state);
  }
  for (std::int64_t i = 0; i < steps; ++i) {
    noise->sample(state.x, state.y, rng, sample);
    step(state, sys, sched, sample);
    if (stride > 0 && state.t % stride == 0) write_trace_row(trace, state);
  }
  if (trace.is_open()) {
    trace.flush();
    if (!trace) throw Error(ErrorCode::IoError, "write failed: trace.csv");
  }

  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  j["schedule"] = sched.describe();
  j["steps"] = steps;
  j["t"] = state.t;
  j["x"] = matrix_to_json(state.x);
  j["y"] = matrix_to_json(state.y);
  j["x_bar"] = matrix_to_json(state.x_bar);
  j["y_bar"] = matrix_to_json(state.y_bar);
  j["last_fast_error"] = (state.x - sys.x_star()).norm();
  j["last_slow_error"] = (state.y - sys.y_star()).norm();
  j["pr_fast_error"] = (state.x_bar - sys.x_star()).norm();
  j["pr_slow_error"] = (state.y_bar - sys.y_star()).norm();
  if (diagnostics) {
    const ErrorSnapshot snap = snapshot_errors(state, sys);
    j["x_hat"] = matrix_to_json(snap.x_hat);
    j["x_tilde"] = matrix_to_json(snap.x_tilde);
    if (state.burn_in == 0) {
      const PrIdentityResidual r = verify_pr_identity(state, sys);
      j["pr_identity"] = {{"fast", r.fast}, {"slow", r.slow}, {"n", r.n}};
    }
  }
  write_json(ctx.out_dir / "simulate.json", j);
  return kExitOk;
}

void write_campaign_outputs(const Context& ctx, const Problem& p, const StepSchedule& sched,
                            const CampaignSpec& spec, const MonteCarloReport& report, const CovariancePack& pack) {
  write_file(ctx.out_dir / "checkpoints.csv", [&](std::ostream& out) { write_checkpoints_csv(out, report); });
  write_file(ctx.out_dir / "density.csv",
             [&](std::ostream& out) { write_density_csv(out, report, false, spec.density_bins); });
  write_file(ctx.out_dir / "density_last.csv",
             [&](std::ostream& out) { write_density_csv(out, report, true, spec.density_bins); });
  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  j["schedule"] = sched.describe();
  j["report"] = report_to_json(report);
  j["pack"] = pack_to_json(pack);
  const std::uint64_t draws = ctx.cfg.get_uint64_or("theory.draws", 1000000);
  j["corollary1_targets"] = targets_json(corollary1_targets(pack, draws, derive_seed(spec.seed, 0xC0)));
  write_json(ctx.out_dir / "report.json", j);
}

int cmd_clt(const Context& ctx) {
  const Problem p = make_problem(ctx);
  const StepSchedule sched = schedule_from_keyvalue(ctx.cfg, "schedule.");
  const CampaignSpec spec = campaign_spec(ctx, *p.sys);
  const MonteCarloReport report = run_campaign(*p.sys, sched, p.factory(), spec);
  write_campaign_outputs(ctx, p, sched, spec, report, compute_pack(*p.sys));
  return kExitOk;
}

std::vector<StepSchedule> comparison_schedules(const Context& ctx, std::uint64_t horizon,
                                               std::vector<std::string>& names) {
  const KeyValueFile& cfg = ctx.cfg;
  std::vector<StepSchedule> out;
  if (cfg.has("compare.schedules")) {
    names = cfg.get_words("compare.schedules");
    if (names.empty()) throw Error(ErrorCode::ParseError, "compare.schedules is empty");
    for (const auto& name : names) out.push_back(schedule_from_keyvalue(cfg, "compare." + name + "."));
    return out;
  }
  const double alpha1 = cfg.get_double_or("compare.alpha1", 1.0);
  const double gamma1 = cfg.get_double_or("compare.gamma1", 0.5);
  names = {"poly_0.55_0.6", "poly_0.6_0.65", "log_corrected"};
  out.push_back(StepSchedule::polynomial(alpha1, 0.55, gamma1, 0.6));
  out.push_back(StepSchedule::polynomial(alpha1, 0.6, gamma1, 0.65));
  out.push_back(StepSchedule::log_corrected(alpha1, cfg.get_double_or("compare.c_a", 0.1), gamma1,
                                            cfg.get_double_or("compare.c_b", 0.2), horizon));
  return out;
}

int cmd_compare_schedules(const Context& ctx) {
  const Problem p = make_problem(ctx, "tdc");
  CampaignSpec spec = campaign_spec(ctx, *p.sys);
  if (!ctx.cfg.has("campaign.trials")) spec.trials = 100;
  std::vector<std::string> names;
  const std::vector<StepSchedule> schedules = comparison_schedules(ctx, spec.horizon(), names);
  std::optional<std::size_t> reference;
  if (ctx.cfg.has("compare.reference")) {
    const std::string ref = ctx.cfg.get("compare.reference");
    const auto it = std::find(names.begin(), names.end(), ref);
    if (it == names.end()) throw Error(ErrorCode::ParseError, "compare.reference names no listed schedule");
    reference = static_cast<std::size_t>(it - names.begin());
  }
  const ComparisonTable table = schedule_comparison(*p.sys, schedules, p.factory(), spec, reference);
  write_file(ctx.out_dir / "comparison.csv", [&](std::ostream& out) { write_comparison_csv(out, table); });
  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  j["schedule_names"] = names;
  j["comparison"] = comparison_to_json(table);
  write_json(ctx.out_dir / "report.json", j);
  return kExitOk;
}

int cmd_tdc(const Context& ctx) {
  Problem p;
  p.kind = "tdc";
  p.mdp = tdc_bundle(ctx);
  p.tdc = build_tdc_system(p.mdp->mdp, p.mdp->features, p.mdp->behavior, p.mdp->target);
  p.sys = std::make_unique<TwoTimeScaleSystem>(p.tdc->system);
  p.mode = tdc_mode(ctx.cfg, "additive");
  for (const auto& w : p.tdc->warnings) *ctx.log << "warning: " << w << '\n';

  save_mdp(*p.mdp, ctx.out_dir / "mdp.txt");
  save_system(*p.sys, ctx.out_dir / "system.txt");
  const CovariancePack pack = compute_pack(*p.sys);
  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  const TdcExpectations& e = p.tdc->expectations;
  j["expectations"] = {{"A_ff", matrix_to_json(e.a_ff)}, {"A_fs", matrix_to_json(e.a_fs)},
                       {"A_sf", matrix_to_json(e.a_sf)}, {"A_ss", matrix_to_json(e.a_ss)},
                       {"b", matrix_to_json(e.b)},       {"stationary", matrix_to_json(e.stationary)}};
  j["x_star"] = matrix_to_json(p.sys->x_star());
  j["y_star"] = matrix_to_json(p.sys->y_star());
  j["pack"] = pack_to_json(pack);

  if (ctx.cfg.has("schedule.kind")) {
    const StepSchedule sched = schedule_from_keyvalue(ctx.cfg, "schedule.");
    const CampaignSpec spec = campaign_spec(ctx, *p.sys);
    const MonteCarloReport report = run_campaign(*p.sys, sched, p.factory(), spec);
    write_campaign_outputs(ctx, p, sched, spec, report, pack);
  }
  write_json(ctx.out_dir / "tdc.json", j);
  return kExitOk;
}

std::vector<std::uint64_t> uint_list(const KeyValueFile& cfg, const std::string& key,
                                     std::vector<std::uint64_t> fallback) {
  if (!cfg.has(key)) return fallback;
  std::vector<std::uint64_t> out;
  for (std::int64_t v : cfg.get_ints(key)) {
    if (v < 1) throw Error(ErrorCode::InvalidArgument, key + " entries must be >= 1");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

int cmd_bounds(const Context& ctx) {
  const KeyValueFile& cfg = ctx.cfg;
  const Problem p = make_problem(ctx);
  const CovariancePack pack = compute_pack(*p.sys);
  const double c = cfg.get_double_or("bounds.c", 1.0);
  const std::vector<std::uint64_t> ns = uint_list(cfg, "bounds.n_values", {1000, 10000, 100000});
  const std::uint64_t grid_n = cfg.has("bounds.n") ? static_cast<std::uint64_t>(cfg.get_int("bounds.n")) : ns.back();
  const std::vector<double> as =
      cfg.has("bounds.a_values") ? cfg.get_doubles("bounds.a_values") : std::vector<double>{0.55, 0.6, 0.65, 0.7};
  const std::vector<double> bs = cfg.has("bounds.b_values") ? cfg.get_doubles("bounds.b_values")
                                                            : std::vector<double>{0.6, 0.65, 0.7, 0.75, 0.8};

  json j = provenance(ctx);
  j["problem"] = problem_json(p);
  json grid = json::array();
  for (double a : as) {
    for (double b : bs) {
      json row{{"a", a}, {"b", b}, {"n", grid_n}};
      if (in_theta_region(a, b)) {
        row["in_theta"] = true;
        row["bound"] = theorem1_bound(a, b, grid_n, c);
      } else {
        row["in_theta"] = false;
        row["bound"] = nullptr;
      }
      grid.push_back(row);
    }
  }
  j["theorem1_grid"] = grid;

  json opt = json::array();
  for (std::uint64_t n : ns) {
    const Theorem1Optimum o = optimize_theorem1(n, c);
    opt.push_back({{"n", n}, {"a", o.a}, {"b", o.b}, {"bound", o.bound}});
  }
  j["theorem1_optimum"] = opt;

  const std::uint64_t d =
      cfg.has("bounds.d") ? static_cast<std::uint64_t>(cfg.get_int("bounds.d")) : static_cast<std::uint64_t>(p.sys->dim());
  const SpdMatrix sigma(pack.Sigma_star);
  json lower = json::array();
  for (std::uint64_t n : ns) {
    const LowerBound lb = lower_bound(d, n, sigma);
    lower.push_back({{"n", n}, {"d", d}, {"value", lb.value}, {"regime", lb.regime}, {"kappa", lb.kappa}});
  }
  j["lower_bound"] = lower;

  const std::uint64_t draws = cfg.get_uint64_or("theory.draws", 1000000);
  j["corollary1_targets"] = targets_json(corollary1_targets(pack, draws, derive_seed(run_seed(ctx), 0xC0)));

  if (cfg.has("schedule.kind")) {
    const StepSchedule sched = schedule_from_keyvalue(cfg, "schedule.");
    json rates = json::array();
    for (std::uint64_t n : ns) {
      const RateReport r = err_rates(sched, n);
      rates.push_back({{"n", n}, {"err_x", r.err_x}, {"err_xy", r.err_xy}, {"err_y", r.err_y}});
    }
    j["schedule"] = sched.describe();
    j["err_rates"] = rates;
  }
  write_json(ctx.out_dir / "bounds.json", j);
  return kExitOk;
}

int dispatch(const Context& ctx) {
  if (ctx.command == "gen-system") return cmd_gen_system(ctx);
  if (ctx.command == "theory") return cmd_theory(ctx);
  if (ctx.command == "simulate") return cmd_simulate(ctx);
  if (ctx.command == "clt") return cmd_clt(ctx);
  if (ctx.command == "compare-schedules") return cmd_compare_schedules(ctx);
  if (ctx.command == "tdc") return cmd_tdc(ctx);
  if (ctx.command == "bounds") return cmd_bounds(ctx);
  throw Error(ErrorCode::ParseError, "unknown command " + ctx.command);
}

unsigned resolve_workers(std::optional<unsigned> flag, const KeyValueFile& cfg) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TSALAB_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || v == 0) throw Error(ErrorCode::InvalidArgument, "TSALAB_WORKERS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  if (cfg.has("campaign.workers")) {
    const std::int64_t v = cfg.get_int("campaign.workers");
    if (v < 1) throw Error(ErrorCode::InvalidArgument, "campaign.workers must be >= 1");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-time-scale stochastic approximation laboratory", "tsalab"};
  app.set_version_flag("--version", TSALAB_VERSION);
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trace_stride;

  for (const std::string& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", config, "run configuration (key = value)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "overrides campaign.seed");
    sub->add_option("--trace-stride", trace_stride, "trace every k-th step (simulate)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.config_path = config;
  ctx.seed_override = seed;
  ctx.trace_stride = trace_stride;
  ctx.log = &err;
  try {
    {
      std::ifstream in(ctx.config_path, std::ios::binary);
      if (!in) throw Error(ErrorCode::IoError, "cannot read config " + config);
      std::ostringstream buf;
      buf << in.rdbuf();
      ctx.config_text = buf.str();
    }
    ctx.cfg = KeyValueFile::parse(ctx.config_text);
    check_keys(ctx.cfg);
    ctx.workers = resolve_workers(workers, ctx.cfg);
    ctx.out_dir = out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec || !fs::is_directory(ctx.out_dir))
      throw Error(ErrorCode::IoError, "output directory not usable: " + out_dir);
    const int code = dispatch(ctx);
    out << ctx.command << ": wrote outputs to " << ctx.out_dir.string() << '\n';
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace tsalab
