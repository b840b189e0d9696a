#include "tsalab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tsalab/rng.hpp"

namespace tsalab {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::InvalidArgument, "normal_quantile: p must lie in [0, 1]");
  }
  // Acklam's coefficients.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double empirical_w1_to_gaussian(std::vector<double> samples, double sigma) {
  if (samples.size() < 2) throw Error(ErrorCode::EmptyInput, "W1 needs at least 2 samples");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  std::sort(samples.begin(), samples.end());
  // Bootstrap loops call this repeatedly with the same sample size.
  thread_local std::vector<double> quantiles;
  if (quantiles.size() != samples.size()) {
    const double m = static_cast<double>(samples.size());
    quantiles.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) quantiles[i] = normal_quantile((static_cast<double>(i) + 0.5) / m);
  }
  double sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) sum += std::abs(samples[i] - sigma * quantiles[i]);
  return sum / static_cast<double>(samples.size());
}

double empirical_w1_two_sample(std::vector<double> samples, std::span<const double> reference_in) {
  if (samples.size() < 2 || reference_in.size() < 2) throw Error(ErrorCode::EmptyInput, "W1 needs at least 2 samples");
  std::sort(samples.begin(), samples.end());
  std::vector<double> copy;
  std::span<const double> reference = reference_in;
  if (!std::is_sorted(reference.begin(), reference.end())) {
    copy.assign(reference_in.begin(), reference_in.end());
    std::sort(copy.begin(), copy.end());
    reference = copy;
  }
  const double m = static_cast<double>(samples.size());
  const double r = static_cast<double>(reference.size());
  double sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // Linear interpolation of the reference quantile at level (i + 0.5)/m.
    const double pos = (static_cast<double>(i) + 0.5) / m * r - 0.5;
    double q;
    if (pos <= 0) {
      q = reference.front();
    } else if (pos >= r - 1) {
      q = reference.back();
    } else {
      const auto k = static_cast<std::size_t>(pos);
      const double frac = pos - static_cast<double>(k);
      q = reference[k] + frac * (reference[k + 1] - reference[k]);
    }
    sum += std::abs(samples[i] - q);
  }
  return sum / m;
}

namespace {

double percentile(std::vector<double>& sorted, double p) {
  // Linear interpolation between order statistics.
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(k);
  return sorted[k] + frac * (sorted[k + 1] - sorted[k]);
}

}  // namespace

BootstrapEstimate bootstrap(std::size_t m, const std::function<double(std::span<const std::size_t>)>& statistic,
                            std::uint64_t seed, std::size_t resamples) {
  if (m < 1) throw Error(ErrorCode::EmptyInput, "bootstrap needs at least one item");
  if (resamples < 2) throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least 2 resamples");
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  BootstrapEstimate out;
  out.value = statistic(idx);
  Rng rng(seed);
  std::vector<double> reps(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(m));
    reps[r] = statistic(idx);
  }
  double mean = 0;
  for (double v : reps) mean += v;
  mean /= static_cast<double>(resamples);
  double ss = 0;
  for (double v : reps) ss += (v - mean) * (v - mean);
  out.std_error = std::sqrt(ss / static_cast<double>(resamples - 1));
  out.bias = mean - out.value;
  std::sort(reps.begin(), reps.end());
  out.ci_lo = percentile(reps, 0.025);
  out.ci_hi = percentile(reps, 0.975);
  return out;
}

BootstrapEstimate bootstrap_mean(const std::vector<double>& values, std::uint64_t seed, std::size_t resamples) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap_mean needs samples");
  return bootstrap(
      values.size(),
      [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += values[i];
        return s / static_cast<double>(idx.size());
      },
      seed, resamples);
}

ExpectedError expected_error(const std::vector<Vector>& samples, std::uint64_t seed) {
  if (samples.size() < 2) throw Error(ErrorCode::EmptyInput, "expected_error needs at least 2 samples");
  std::vector<double> norms(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) norms[i] = samples[i].norm();
  const auto b = bootstrap_mean(norms, derive_seed(seed, 0xe4));
  return {b.value, b.std_error, b.ci_lo, b.ci_hi};
}

Vector empirical_mean(const std::vector<Vector>& samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "empirical_mean needs samples");
  Vector m = Vector::Zero(samples.front().size());
  for (const auto& s : samples) m += s;
  return m / static_cast<double>(samples.size());
}

Matrix empirical_covariance(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw Error(ErrorCode::EmptyInput, "empirical_covariance needs at least 2 samples");
  const Vector mean = empirical_mean(samples);
  Matrix c = Matrix::Zero(mean.size(), mean.size());
  for (const auto& s : samples) {
    const Vector d = s - mean;
    c.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  c = c.selfadjointView<Eigen::Lower>();
  return c / static_cast<double>(samples.size() - 1);
}

Matrix empirical_second_moment(const std::vector<Vector>& samples, std::span<const std::size_t> idx) {
  if (samples.empty() || idx.empty()) throw Error(ErrorCode::EmptyInput, "second moment needs samples");
  const auto d = samples.front().size();
  Matrix m = Matrix::Zero(d, d);
  for (auto i : idx) m.selfadjointView<Eigen::Lower>().rankUpdate(samples[i]);
  m = m.selfadjointView<Eigen::Lower>();
  return m / static_cast<double>(idx.size());
}

Matrix empirical_second_moment(const std::vector<Vector>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return empirical_second_moment(samples, idx);
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::EmptyInput, "sample_std needs at least 2 samples");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double DensityExport::hist_at(double x) const {
  if (hist.empty() || x < bin_edges.front() || x > bin_edges.back()) return 0.0;
  const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), x);
  auto k = static_cast<std::size_t>(std::distance(bin_edges.begin(), it));
  k = k == 0 ? 0 : k - 1;
  if (k >= hist.size()) k = hist.size() - 1;
  return hist[k];
}

DensityExport density_export(const std::vector<double>& samples, std::size_t bins, std::size_t grid_points) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "density_export needs samples");
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "density_export needs bins >= 2");
  if (grid_points < 2) throw Error(ErrorCode::InvalidArgument, "density_export needs grid_points >= 2");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double m = static_cast<double>(samples.size());
  const double s = samples.size() >= 2 ? sample_std(samples) : 0.0;

  DensityExport out;
  const double floor = 1e-3 * std::max({1.0, std::abs(lo), std::abs(hi)});
  out.bandwidth = std::max(1.06 * s * std::pow(m, -0.2), floor);
  const double h = out.bandwidth;

  if (hi > lo) {
    const double width = (hi - lo) / static_cast<double>(bins);
    out.bin_edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) out.bin_edges[k] = lo + width * static_cast<double>(k);
    out.bin_edges.back() = hi;
    std::vector<double> counts(bins, 0.0);
    for (double v : samples) {
      auto k = static_cast<std::size_t>((v - lo) / width);
      if (k >= bins) k = bins - 1;
      counts[k] += 1.0;
    }
    out.hist.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) out.hist[k] = counts[k] / (m * width);
  } else {
    out.bin_edges = {lo - 0.5 * h, lo + 0.5 * h};
    out.hist = {1.0 / h};
  }

  const double g_lo = lo - 7.0 * h;
  const double g_hi = hi + 7.0 * h;
  out.grid.resize(grid_points);
  out.kde.assign(grid_points, 0.0);
  const double norm = 1.0 / (m * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = g_lo + (g_hi - g_lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    out.grid[g] = x;
    double acc = 0;
    for (double v : samples) {
      const double z = (x - v) / h;
      if (std::abs(z) < 40.0) acc += std::exp(-0.5 * z * z);
    }
    out.kde[g] = acc * norm;
  }
  return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "trapezoid: bad input");
  double s = 0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

}  // namespace tsalab
