#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsalab/matlib.hpp"

namespace tsalab {

/// Standard normal quantile: rational approximation (relative error 1.15e-9)
/// followed by one Halley step against erfc.
double normal_quantile(double p);

/// (1/m) sum_i |s_(i) - sigma Phi^{-1}((i - 0.5)/m)| over the sorted samples.
/// Throws EmptyInput for fewer than 2 samples, InvalidArgument for sigma < 0.
double empirical_w1_to_gaussian(std::vector<double> samples, double sigma);

/// 1-D W1 between the empirical law of `samples` and that of a (large)
/// reference sample, evaluated by quantile coupling on the samples' grid.
double empirical_w1_two_sample(std::vector<double> samples, std::span<const double> reference);

struct BootstrapEstimate {
  double value = 0;      // statistic on the full sample
  double std_error = 0;  // standard deviation over resamples
  double ci_lo = 0;      // 2.5% percentile
  double ci_hi = 0;      // 97.5% percentile
  double bias = 0;       // mean over resamples minus value

  double bias_corrected() const noexcept { return value - bias; }
};

inline constexpr std::size_t kBootstrapResamples = 1000;

/// Nonparametric bootstrap over item indices 0..m-1. `statistic` receives the
/// resampled indices (the identity selection for the full-sample value).
BootstrapEstimate bootstrap(std::size_t m, const std::function<double(std::span<const std::size_t>)>& statistic,
                            std::uint64_t seed, std::size_t resamples = kBootstrapResamples);

BootstrapEstimate bootstrap_mean(const std::vector<double>& values, std::uint64_t seed,
                                 std::size_t resamples = kBootstrapResamples);

struct ExpectedError {
  double mean_norm = 0;
  double std_error = 0;
  double ci_lo = 0;
  double ci_hi = 0;
};

/// Mean Euclidean norm with a seeded 1000-resample bootstrap.
ExpectedError expected_error(const std::vector<Vector>& samples, std::uint64_t seed = 0);

Vector empirical_mean(const std::vector<Vector>& samples);
/// Unbiased sample covariance (divisor m - 1), symmetrised.
Matrix empirical_covariance(const std::vector<Vector>& samples);
/// (1/m) sum s s^T
Matrix empirical_second_moment(const std::vector<Vector>& samples);
Matrix empirical_second_moment(const std::vector<Vector>& samples, std::span<const std::size_t> idx);

double sample_std(std::span<const double> values);

struct DensityExport {
  std::vector<double> bin_edges;  // bins + 1 entries
  std::vector<double> hist;       // density per bin (integrates to 1)
  std::vector<double> grid;       // 512 points over [min - 7h, max + 7h]
  std::vector<double> kde;        // Gaussian-kernel density on the grid
  double bandwidth = 0;

  /// Histogram density of the bin containing x (0 outside the bins).
  double hist_at(double x) const;
};

/// Equal-width histogram over [min, max] and a Gaussian KDE with Silverman
/// bandwidth 1.06 s m^{-1/5}, floored at 1e-3 max(1, max|x|). All-equal
/// input produces a single bin of width h centred on the value.
DensityExport density_export(const std::vector<double>& samples, std::size_t bins, std::size_t grid_points = 512);

double trapezoid(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tsalab
