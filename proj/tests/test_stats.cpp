#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "oracles.hpp"
#include "tsalab/stats.hpp"

using namespace tsalab;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<double> normals(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(m);
  for (double& v : out) v = rng.normal();
  return out;
}

}  // namespace

TEST(NormalQuantile, InvertsTheCdf) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.4, 0.77, 0.99, 1 - 1e-9}) {
    const double x = normal_quantile(p);
    EXPECT_NEAR(phi_cdf(x), p, 1e-12 * std::max(1.0, p / (1 - p)) + 1e-15 * p) << p;
    // 1 - p is inexact for tiny p, so symmetry is checked away from the tails.
    if (p > 1e-6 && p < 1 - 1e-6) EXPECT_NEAR(normal_quantile(1 - p), -x, 1e-9);
  }
  EXPECT_TRUE(std::isinf(normal_quantile(0.0)));
  EXPECT_THROW(normal_quantile(1.5), Error);
}

TEST(W1Gaussian, ZeroSamples) {
  const std::size_t m = 10000;
  const double w = empirical_w1_to_gaussian(std::vector<double>(m, 0.0), 1.0);
  EXPECT_NEAR(w, std::sqrt(2 / std::numbers::pi), 2 / std::sqrt(static_cast<double>(m)));
}

TEST(W1Gaussian, PerfectCoupling) {
  const std::size_t m = 1000;
  std::vector<double> s(m);
  for (std::size_t i = 0; i < m; ++i) s[i] = 2.5 * normal_quantile((static_cast<double>(i) + 0.5) / m);
  std::reverse(s.begin(), s.end());
  EXPECT_LE(empirical_w1_to_gaussian(s, 2.5), 1e-12);
}

TEST(W1Gaussian, NormalDraws) {
  EXPECT_LE(empirical_w1_to_gaussian(normals(100000, 1), 1.0), 0.02);
  // Wrong scale is detected: the coupling distance is |s - 1| E|Z|.
  EXPECT_NEAR(empirical_w1_to_gaussian(normals(100000, 1), 2.0), std::sqrt(2 / std::numbers::pi), 0.03);
}

TEST(W1Gaussian, Errors) {
  try {
    empirical_w1_to_gaussian({1.0}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  EXPECT_THROW(empirical_w1_to_gaussian({1.0, 2.0}, -1.0), Error);
}

TEST(W1TwoSample, ShiftAndIdentity) {
  auto ref = normals(50000, 3);
  std::sort(ref.begin(), ref.end());
  const auto s = normals(2000, 4);
  std::vector<double> shifted = s;
  for (double& v : shifted) v += 0.5;
  const double base = empirical_w1_two_sample(s, ref);
  EXPECT_LE(base, 0.1);
  EXPECT_NEAR(empirical_w1_two_sample(shifted, ref), 0.5, base + 0.02);
  EXPECT_LE(empirical_w1_two_sample(ref, ref), 1e-12);
  // An unsorted reference gives the same value.
  const auto unsorted = normals(50000, 3);
  EXPECT_EQ(empirical_w1_two_sample(s, unsorted), base);
}

TEST(Bootstrap, MeanStandardError) {
  const auto v = normals(4000, 9);
  const auto b = bootstrap_mean(v, 1);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  EXPECT_DOUBLE_EQ(b.value, mean);
  const double se = sample_std(v) / std::sqrt(4000.0);
  EXPECT_NEAR(b.std_error, se, 0.1 * se);
  EXPECT_LT(b.ci_lo, mean);
  EXPECT_GT(b.ci_hi, mean);
  EXPECT_NEAR(b.ci_hi - b.ci_lo, 2 * 1.96 * se, 0.2 * se);
  EXPECT_LE(std::abs(b.bias), 0.2 * se);
  EXPECT_DOUBLE_EQ(b.bias_corrected(), b.value - b.bias);
}

TEST(Bootstrap, DeterministicAndBiasDetected) {
  const auto v = normals(500, 2);
  const auto a = bootstrap_mean(v, 7), b = bootstrap_mean(v, 7);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.ci_lo, b.ci_lo);
  // The plug-in square of the mean is biased upward by Var/m.
  const auto sq = bootstrap(
      v.size(),
      [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += v[i];
        s /= static_cast<double>(idx.size());
        return s * s;
      },
      5, 4000);
  const double var = sample_std(v) * sample_std(v);
  EXPECT_NEAR(sq.bias, var / 500.0, 0.3 * var / 500.0);
  EXPECT_THROW(bootstrap_mean({}, 1), Error);
}

TEST(ExpectedError, Examples) {
  Vector p(2);
  p << 3, 4;
  const auto e = expected_error(std::vector<Vector>(10, p));
  EXPECT_DOUBLE_EQ(e.mean_norm, 5.0);
  EXPECT_EQ(e.std_error, 0.0);
  Rng rng(5);
  std::vector<Vector> s(1000000, Vector(2));
  for (auto& v : s) v << rng.normal(), rng.normal();
  const auto g = expected_error(s, 3);
  EXPECT_NEAR(g.mean_norm, std::sqrt(std::numbers::pi / 2), 3 * g.std_error);
  EXPECT_THROW(expected_error(std::vector<Vector>(1, p)), Error);
}

TEST(Moments, CovarianceAndSecondMoment) {
  std::vector<Vector> s;
  for (double x : {1.0, 2.0, 3.0, 6.0}) s.push_back(Vector::Constant(2, x) + Vector::Unit(2, 0));
  const Vector mean = empirical_mean(s);
  EXPECT_DOUBLE_EQ(mean(0), 4.0);
  EXPECT_DOUBLE_EQ(mean(1), 3.0);
  const Matrix c = empirical_covariance(s);
  EXPECT_DOUBLE_EQ(c(0, 0), 14.0 / 3.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 14.0 / 3.0);
  const Matrix m = empirical_second_moment(s);
  EXPECT_DOUBLE_EQ(m(1, 1), (1 + 4 + 9 + 36) / 4.0);
  const std::vector<std::size_t> idx{3, 3};
  EXPECT_DOUBLE_EQ(empirical_second_moment(s, idx)(1, 1), 36.0);
  EXPECT_DOUBLE_EQ(sample_std(std::vector<double>{1, 3}), std::sqrt(2.0));
  EXPECT_THROW(empirical_covariance(std::vector<Vector>(1, mean)), Error);
}

TEST(Density, StandardNormal) {
  const auto d = density_export(normals(100000, 12), 60);
  ASSERT_EQ(d.grid.size(), 512u);
  ASSERT_EQ(d.hist.size(), 60u);
  ASSERT_EQ(d.bin_edges.size(), 61u);
  std::size_t i0 = 0;
  for (std::size_t i = 0; i < d.grid.size(); ++i)
    if (std::abs(d.grid[i]) < std::abs(d.grid[i0])) i0 = i;
  // Linear interpolation to 0.
  const std::size_t j = d.grid[i0] < 0 ? i0 + 1 : i0 - 1;
  const double w = std::abs(d.grid[i0]) / std::abs(d.grid[j] - d.grid[i0]);
  const double at0 = (1 - w) * d.kde[i0] + w * d.kde[j];
  EXPECT_NEAR(at0, 1 / std::sqrt(2 * std::numbers::pi), 0.02);
  EXPECT_NEAR(trapezoid(d.grid, d.kde), 1.0, 1e-6);
  double mass = 0;
  for (std::size_t k = 0; k < d.hist.size(); ++k) mass += d.hist[k] * (d.bin_edges[k + 1] - d.bin_edges[k]);
  EXPECT_NEAR(mass, 1.0, 1e-12);
  EXPECT_NEAR(d.bandwidth, 1.06 * sample_std(normals(100000, 12)) * std::pow(1e5, -0.2), 1e-12);
  EXPECT_NEAR(d.hist_at(0.0), 0.3989, 0.03);
  EXPECT_EQ(d.hist_at(100.0), 0.0);
}

TEST(Density, Degenerate) {
  const auto d = density_export(std::vector<double>(50, 2.0), 10);
  ASSERT_EQ(d.hist.size(), 1u);
  EXPECT_NEAR(d.bandwidth, 1e-3 * 2.0, 1e-15);
  EXPECT_NEAR(d.bin_edges[1] - d.bin_edges[0], d.bandwidth, 1e-15);
  EXPECT_NEAR(d.hist[0] * d.bandwidth, 1.0, 1e-12);
  EXPECT_NEAR(trapezoid(d.grid, d.kde), 1.0, 1e-6);
}

TEST(Density, TwoPointSymmetric) {
  const auto d = density_export({-1.0, 1.0}, 4);
  for (std::size_t k = 0; k < d.hist.size(); ++k) EXPECT_NEAR(d.hist[k], d.hist[d.hist.size() - 1 - k], 1e-15);
  const std::size_t n = d.kde.size();
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_NEAR(d.grid[k], -d.grid[n - 1 - k], 1e-12);
    EXPECT_NEAR(d.kde[k], d.kde[n - 1 - k], 1e-12);
  }
  EXPECT_THROW(density_export({}, 4), Error);
  EXPECT_THROW(density_export({1.0, 2.0}, 1), Error);
}
