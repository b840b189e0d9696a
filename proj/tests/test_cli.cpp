#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "tsalab/cli.hpp"
#include "tsalab/system.hpp"
#include "tsalab/theory.hpp"

using namespace tsalab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("tsalab_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  int run_command(const std::string& cmd, const fs::path& cfg, const fs::path& out,
                  std::vector<std::string> extra = {}) {
    std::vector<std::string> args{cmd, "--config", cfg.string(), "--out", out.string(), "--workers", "2"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  fs::path dir_;
  std::ostringstream out_, err_;
};

Matrix json_matrix(const json& j) {
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

const char* kTinyClt =
    "system.dx = 2\n"
    "system.dy = 2\n"
    "system.seed = 4\n"
    "system.calibrate = true\n"
    "schedule.kind = polynomial\n"
    "schedule.alpha1 = 0.5\n"
    "schedule.a = 0.6\n"
    "schedule.gamma1 = 0.25\n"
    "schedule.b = 0.75\n"
    "campaign.trials = 40\n"
    "campaign.checkpoints = 100 1000 5000\n"
    "campaign.seed = 3\n"
    "campaign.density_bins = 10\n"
    "theory.draws = 20000\n";

}  // namespace

TEST_F(CliTest, GenSystemRoundTrip) {
  const auto cfg = config("gen.cfg", "system.dx = 3\nsystem.dy = 2\nsystem.seed = 9\n");
  ASSERT_EQ(run_command("gen-system", cfg, dir_ / "gen"), kExitOk) << err_.str();
  const TwoTimeScaleSystem loaded = load_system(dir_ / "gen" / "system.txt");
  const TwoTimeScaleSystem direct = random_system(3, 2, 9);
  EXPECT_EQ(oracle::max_abs_diff(loaded.a_ff(), direct.a_ff()), 0.0);
  EXPECT_EQ(oracle::max_abs_diff(loaded.gamma(), direct.gamma()), 0.0);
  const json j = read_json(dir_ / "gen" / "theory.json");
  EXPECT_EQ(j.at("command"), "gen-system");
  EXPECT_LE(oracle::max_abs_diff(json_matrix(j.at("pack").at("Sigma_star")), compute_pack(direct).Sigma_star), 0.0);
  EXPECT_NE(out_.str().find("gen-system"), std::string::npos);
}

TEST_F(CliTest, CalibratedSystemHasIdentitySlowCovariance) {
  const auto cfg = config("cal.cfg", "system.dx = 2\nsystem.dy = 3\nsystem.seed = 1\nsystem.calibrate = true\n");
  ASSERT_EQ(run_command("gen-system", cfg, dir_ / "cal"), kExitOk) << err_.str();
  const CovariancePack pack = compute_pack(load_system(dir_ / "cal" / "system.txt"));
  EXPECT_LE(oracle::max_abs_diff(pack.Sigma_bar_ss, Matrix::Identity(3, 3)), 1e-9);
}

TEST_F(CliTest, ExitCodes) {
  const auto bad = config("bad.cfg", "system.spectrum_low = 2\nsystem.spectrum_high = 1\n");
  EXPECT_EQ(run_command("gen-system", bad, dir_ / "bad"), kExitConfig);
  EXPECT_NE(err_.str().find("spectrum"), std::string::npos);
  const auto unknown = config("unknown.cfg", "sytem.dx = 2\n");
  EXPECT_EQ(run_command("gen-system", unknown, dir_ / "bad"), kExitConfig);
  EXPECT_EQ(run({"no-such-command"}), kExitUsage);
  EXPECT_EQ(run({"clt"}), kExitUsage);
  EXPECT_EQ(run({"clt", "--config", "x", "--workers", "0"}), kExitUsage);
  EXPECT_EQ(run({"clt", "--config", (dir_ / "missing.cfg").string()}), kExitConfig);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_FALSE(out_.str().empty());
  const auto sched = config("sched.cfg",
                            "schedule.kind = polynomial\nschedule.alpha1 = 1\nschedule.a = 0.6\n"
                            "schedule.gamma1 = 1\nschedule.b = 0.5\n");
  EXPECT_EQ(run_command("simulate", sched, dir_ / "bad"), kExitConfig);
}

TEST_F(CliTest, TinyCltIsFastAndReproducible) {
  const auto cfg = config("clt.cfg", kTinyClt);
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(run_command("clt", cfg, dir_ / "a"), kExitOk) << err_.str();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 5.0);
  ASSERT_EQ(run({"clt", "--config", cfg.string(), "--out", (dir_ / "b").string(), "--workers", "3"}), kExitOk)
      << err_.str();
  for (const char* f : {"checkpoints.csv", "density.csv", "density_last.csv", "report.json"})
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;

  // The density export covers every checkpoint.
  std::ifstream dens(dir_ / "a" / "density.csv");
  std::string line;
  std::getline(dens, line);
  EXPECT_EQ(line, "checkpoint,grid_x,kde,hist");
  std::set<std::string> cps;
  while (std::getline(dens, line)) cps.insert(line.substr(0, line.find(',')));
  EXPECT_EQ(cps, (std::set<std::string>{"100", "1000", "5000"}));

  const json j = read_json(dir_ / "a" / "report.json");
  EXPECT_EQ(j.at("report").at("trials_requested"), 40);
  EXPECT_EQ(j.at("report").at("trials_failed"), 0);
  EXPECT_TRUE(j.at("corollary1_targets").at("slow").contains("mean"));

  // A different seed changes the draws.
  ASSERT_EQ(run_command("clt", cfg, dir_ / "c", {"--seed", "99"}), kExitOk);
  EXPECT_NE(slurp(dir_ / "a" / "checkpoints.csv"), slurp(dir_ / "c" / "checkpoints.csv"));
}

TEST_F(CliTest, SimulateWritesTraceAndIdentity) {
  const auto cfg = config("sim.cfg", std::string(kTinyClt) + "simulate.steps = 50\n");
  ASSERT_EQ(run_command("simulate", cfg, dir_ / "sim", {"--trace-stride", "10"}), kExitOk) << err_.str();
  std::ifstream trace(dir_ / "sim" / "trace.csv");
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  EXPECT_EQ(lines, 1 + 1 + 5);
  const json j = read_json(dir_ / "sim" / "simulate.json");
  // Iterates are indexed from 1, so 50 steps end at t = 51.
  EXPECT_EQ(j.at("t"), 51);
  EXPECT_LE(j.at("pr_identity").at("fast").get<double>(), 1e-8);
  EXPECT_LE(j.at("pr_identity").at("slow").get<double>(), 1e-8);
}

TEST_F(CliTest, CompareSchedulesReportsPairedIntervals) {
  const auto cfg = config("cmp.cfg",
                          "tdc.n_states = 12\ntdc.n_actions = 2\ntdc.d = 4\ntdc.seed = 2\n"
                          "campaign.trials = 12\ncampaign.checkpoints = 100 1000\ncampaign.seed = 6\n"
                          "compare.reference = log_corrected\n");
  ASSERT_EQ(run_command("compare-schedules", cfg, dir_ / "cmp"), kExitOk) << err_.str();
  std::ifstream csv(dir_ / "cmp" / "comparison.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "schedule_id,n,which,mean_error,ci_lo,ci_hi");
  const json j = read_json(dir_ / "cmp" / "report.json");
  EXPECT_EQ(j.at("schedule_names").size(), 3u);
  EXPECT_EQ(j.at("comparison").at("reference_id"), 2);
  std::size_t paired = 0;
  for (const auto& row : j.at("comparison").at("comparison")) {
    if (row.at("schedule_id") == 2) {
      EXPECT_FALSE(row.contains("paired_diff"));
    } else {
      ASSERT_TRUE(row.contains("paired_diff"));
      EXPECT_LE(row.at("paired_ci_lo").get<double>(), row.at("paired_diff").get<double>());
      EXPECT_GE(row.at("paired_ci_hi").get<double>(), row.at("paired_diff").get<double>());
      ++paired;
    }
  }
  EXPECT_GT(paired, 0u);
}

TEST_F(CliTest, TdcCommandWritesInstance) {
  const auto cfg = config("tdc.cfg", "tdc.n_states = 8\ntdc.n_actions = 2\ntdc.d = 3\ntdc.seed = 5\n");
  ASSERT_EQ(run_command("tdc", cfg, dir_ / "tdc"), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "tdc" / "mdp.txt"));
  const json j = read_json(dir_ / "tdc" / "tdc.json");
  EXPECT_EQ(j.at("problem").at("kind"), "tdc");
  EXPECT_EQ(j.at("problem").at("noise_mode"), "additive");
  EXPECT_LE(json_matrix(j.at("x_star")).norm(), 1e-10);
}

TEST_F(CliTest, BoundsAreConsistent) {
  const auto cfg = config("b.cfg",
                          "system.dx = 32\nsystem.dy = 32\nsystem.seed = 2\nbounds.n_values = 1000 100000\n"
                          "theory.draws = 2000\nschedule.kind = polynomial\nschedule.alpha1 = 1\nschedule.a = 0.6\n"
                          "schedule.gamma1 = 0.5\nschedule.b = 0.75\n");
  ASSERT_EQ(run_command("bounds", cfg, dir_ / "b"), kExitOk) << err_.str();
  const json j = read_json(dir_ / "b" / "bounds.json");
  const auto& lower = j.at("lower_bound");
  ASSERT_EQ(lower.size(), 2u);
  EXPECT_EQ(lower[0].at("d"), 64);
  EXPECT_EQ(lower[0].at("regime"), "fano");
  const double ratio = lower[0].at("value").get<double>() / lower[1].at("value").get<double>();
  EXPECT_NEAR(ratio, 10.0, 1e-9);
  for (const auto& row : j.at("theorem1_grid")) {
    const bool in = in_theta_region(row.at("a").get<double>(), row.at("b").get<double>());
    EXPECT_EQ(row.at("in_theta").get<bool>(), in);
    EXPECT_EQ(row.at("bound").is_null(), !in);
  }
  const auto& opt = j.at("theorem1_optimum");
  EXPECT_GT(opt[0].at("bound").get<double>(), opt[1].at("bound").get<double>());
  EXPECT_EQ(j.at("err_rates").size(), 2u);
}
