#pragma once

// Seeded Monte Carlo campaigns over noise realizations.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qspde/solver.hpp"
#include "qspde/spectral_noise.hpp"

namespace qspde {

struct CampaignConfig {
  CovarianceSpec spec{1, 2.0, 8};
  /// Grid on which grad v (and the solver) live; v is sampled on [0, t_end] every output step.
  std::size_t n_x = 32;
  double dt = 1.0 / 1024.0;
  double t_end = 1.0;
  double alpha = 0.2;
  /// When set, each realization also solves for w and records [grad u]_alpha and [u - v]_{1+alpha}.
  std::optional<SolverConfig> solver;
  JSource j = JSource::grad_v_negated();
  std::size_t realizations = 1;
  std::uint64_t root_seed = 0;
  std::size_t workers = 1;
};

struct RealizationRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double grad_v = 0.0;
  std::optional<double> grad_u;
  std::optional<double> remainder;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// -log P(X > M) ~ (M / c)^p fitted over the empirical upper quartile.
struct TailFit {
  double p = 0.0;
  double c = 0.0;
  std::size_t points = 0;
  double r_squared = 0.0;
};

/// Failure fraction above which a campaign is declared failed.
inline constexpr double kMaxFailureFraction = 0.01;

struct McStats {
  std::size_t n = 0;
  std::vector<RealizationRecord> records;
  std::size_t failures = 0;
  bool failed = false;
  Moments grad_v;
  std::optional<Moments> grad_u;
  std::optional<Moments> remainder;
  std::optional<TailFit> grad_v_tail;
  std::optional<TailFit> grad_u_tail;
  std::optional<TailFit> remainder_tail;
};

/// Seed of realization i: derive_seed(root, i).
std::uint64_t realization_seed(std::uint64_t root, std::size_t index);

/// Norms of one realization.
RealizationRecord run_realization(const CampaignConfig& cfg, std::size_t index);

/// Realizations run on `workers` threads; records are stored by index and reduced
/// serially, so the result does not depend on the worker count.
McStats run_campaign(const CampaignConfig& cfg);

Moments moments(const std::vector<double>& values);

/// Smallest sample count accepted by tail_fit.
inline constexpr std::size_t kMinTailSamples = 1000;

/// Regression of log(-log S(M)) on log M with S(M_(i)) = (N - i) / N over the sorted
/// upper quartile, the sample maximum excluded. Throws std::invalid_argument on
/// fewer than kMinTailSamples samples or degenerate (all equal) samples.
TailFit tail_fit(std::vector<double> samples);

/// Same regression on an exact survival function evaluated at the points M.
TailFit tail_fit_survival(const std::vector<double>& m, const std::vector<double>& survival);

struct CovariancePoint {
  double t = 0.0;
  double x = 0.0;
  double t_prime = 0.0;
  double x_prime = 0.0;
};

struct CovarianceResidual {
  CovariancePoint point;
  double estimate = 0.0;
  double standard_error = 0.0;
  double oracle = 0.0;
  double ratio = 0.0;
};

struct CovarianceReport {
  std::size_t n = 0;
  int axis = 0;
  std::vector<CovarianceResidual> residuals;
  double max_ratio = 0.0;
  bool pass = false;
};

/// Residual gate: |estimate - oracle| <= kCovarianceGate * standard error.
inline constexpr double kCovarianceGate = 4.0;

/// Monte Carlo estimate of E[h(t,x) h(t',x')] for h = d_axis v against the closed form.
/// Points are given for d = 1 (x scalar); higher dimensions displace along `axis`.
CovarianceReport covariance_check(const CovarianceSpec& spec, const std::vector<CovariancePoint>& points,
                                  std::size_t n, std::uint64_t seed, int axis = 0);

struct ScalingConfig {
  std::size_t n_x = 2048;
  Component component = Component::gradient(0);
  /// v is sampled at t_start + n dt, n = 0 .. n_times - 1; the last time is the reference.
  double t_start = 1.0 - 1.0 / 16.0;
  double dt = 1.0 / 1024.0;
  std::size_t n_times = 65;
  /// Spatial separations in grid cells and temporal lags in time steps.
  std::vector<std::size_t> spatial_offsets{8, 16, 32, 64, 128};
  std::vector<std::size_t> temporal_lags{1, 2, 4, 8, 16, 32, 64};
  std::size_t batches = 20;
};

struct SlopeFit {
  double slope = 0.0;
  double standard_error = 0.0;
  std::vector<double> separations;
  std::vector<double> second_moments;
};

struct ScalingReport {
  SlopeFit spatial;
  SlopeFit temporal;
};

/// Log-log least-squares slopes of E|h(z) - h(z')|^2 over spatial separations at the
/// reference time (averaged over x) and temporal lags back from it. Standard errors
/// come from the spread of per-batch slopes.
ScalingReport increment_scaling_fit(const CovarianceSpec& spec, std::size_t n, std::uint64_t seed,
                                    const ScalingConfig& cfg = {});

/// Ordinary least-squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qspde
