#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qspde/mc_harness.hpp"

using namespace qspde;

TEST_CASE("least squares slope") {
  CHECK(ols_slope({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(2.0));
  const auto m = moments({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.min == 1.0);
  CHECK(m.max == 4.0);
}

TEST_CASE("tail fit on exponential samples") {
  std::mt19937_64 eng(1);
  std::exponential_distribution<double> exp1(2.0);
  std::vector<double> s(10000);
  for (auto& x : s) x = exp1(eng);
  const auto fit = tail_fit(s);
  CHECK(fit.p >= 0.85);
  CHECK(fit.p <= 1.15);
  CHECK(fit.c == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("tail fit on |Gaussian| samples matches the same regression on the exact survival") {
  // The upper-quartile regression of log(-log S) on log M is not asymptotic: for |Z| it sees the
  // curvature of -log S(M) = M^2/2 + log M + ... and settles well below 2. The oracle is the
  // identical regression applied to the exact survival function at the sample quantiles.
  std::mt19937_64 eng(2);
  std::normal_distribution<double> n01;
  const std::size_t n = 10000;
  std::vector<double> s(n);
  for (auto& x : s) x = std::abs(n01(eng));
  const auto fit = tail_fit(s);

  std::vector<double> m, surv;
  for (std::size_t i = (3 * n) / 4; i + 1 < n; ++i) {
    // Quantile of the half normal at level i / n by bisection.
    const double target = static_cast<double>(n - i) / static_cast<double>(n);
    double lo = 0.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (oracle::half_normal_survival(mid) > target ? lo : hi) = mid;
    }
    m.push_back(0.5 * (lo + hi));
    surv.push_back(oracle::half_normal_survival(m.back()));
  }
  const auto pop = tail_fit_survival(m, surv);
  CHECK(pop.p == doctest::Approx(1.47).epsilon(0.03));
  CHECK(std::abs(fit.p - pop.p) < 0.1);
}

TEST_CASE("tail fit preconditions") {
  CHECK_THROWS(tail_fit(std::vector<double>(999, 1.0)));
  CHECK_THROWS(tail_fit(std::vector<double>(2000, 3.0)));
}

TEST_CASE("single realization campaign equals its record") {
  CampaignConfig cfg;
  cfg.spec = CovarianceSpec(1, 1.5, 7);
  cfg.n_x = 16;
  cfg.dt = 1.0 / 256;
  cfg.t_end = 0.25;
  cfg.alpha = 0.2;
  cfg.realizations = 1;
  cfg.root_seed = 5;
  const auto stats = run_campaign(cfg);
  REQUIRE(stats.records.size() == 1);
  CHECK(stats.grad_v.mean == stats.records[0].grad_v);
  CHECK(stats.grad_v.min == stats.records[0].grad_v);
  CHECK(stats.grad_v.stddev == 0.0);
  CHECK(stats.records[0].seed == realization_seed(5, 0));
  CHECK(run_realization(cfg, 0).grad_v == stats.records[0].grad_v);
}

TEST_CASE("campaigns are deterministic and independent of the worker count") {
  CampaignConfig cfg;
  cfg.spec = CovarianceSpec(1, 2.0, 7);
  cfg.n_x = 16;
  cfg.alpha = 0.3;
  SolverConfig s;
  s.n_x = 16;
  s.dt = 1.0 / 1024;
  s.t_end = 0.25;
  s.output_stride = 16;
  s.nonlinearity = Nonlinearity::tanh_perturbed(0.5);
  cfg.solver = s;
  cfg.realizations = 6;
  cfg.root_seed = 9;
  const auto a = run_campaign(cfg);
  cfg.workers = 3;
  const auto b = run_campaign(cfg);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.records[i].grad_v == b.records[i].grad_v);
    CHECK(*a.records[i].grad_u == *b.records[i].grad_u);
    CHECK(*a.records[i].remainder == *b.records[i].remainder);
  }
  CHECK(a.grad_v.mean == b.grad_v.mean);
  CHECK(a.failures == 0);
  CHECK_FALSE(a.failed);
  CHECK(a.remainder->min >= 0.0);
}

TEST_CASE("identity with j = -grad v: [grad u] tracks [grad v]") {
  CampaignConfig cfg;
  cfg.spec = CovarianceSpec(1, 2.0, 8);
  cfg.alpha = 0.3;
  SolverConfig s;
  s.n_x = 64;
  s.dt = 1.0 / 16384;
  s.t_end = 0.25;
  s.output_stride = 64;
  cfg.solver = s;
  cfg.realizations = 3;
  const auto stats = run_campaign(cfg);
  for (const auto& r : stats.records) CHECK(std::abs(*r.grad_u - r.grad_v) <= 0.05 * r.grad_v);
}

TEST_CASE("covariance check") {
  const CovarianceSpec spec(1, 2.0, 32);
  const std::vector<CovariancePoint> zero_pts{{0.5, 0.0, 0.0, 0.0}, {1.0, 0.25, 0.0, 0.0}};
  const auto z = covariance_check(spec, zero_pts, 200, 1);
  CHECK(z.pass);
  for (const auto& r : z.residuals) CHECK(r.estimate == 0.0);

  const std::vector<CovariancePoint> pts{{1.0, 0.0, 1.0, 0.0}, {0.5, 0.125, 0.25, 0.0}};
  const auto a = covariance_check(spec, pts, 4000, 2);
  const auto b = covariance_check(spec, pts, 8000, 3);
  CHECK(a.pass);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double shrink = a.residuals[i].standard_error / b.residuals[i].standard_error;
    CHECK(shrink == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
  }
  CHECK_THROWS(covariance_check(spec, {{1.5, 0, 0, 0}}, 10, 1));
}

TEST_CASE("increment scaling on a small grid") {
  const CovarianceSpec spec(1, 1.5, 63);
  ScalingConfig cfg;
  cfg.n_x = 128;
  cfg.spatial_offsets = {1, 2, 4, 8};
  cfg.t_start = 1.0 - 1.0 / 64;
  cfg.dt = 1.0 / 1024;
  cfg.n_times = 17;
  cfg.temporal_lags = {1, 2, 4, 8, 16};
  cfg.batches = 10;
  const auto h = increment_scaling_fit(spec, 200, 4, cfg);
  cfg.component = Component::value();
  const auto v = increment_scaling_fit(spec, 200, 4, cfg);
  CHECK(v.spatial.slope > h.spatial.slope);
  CHECK(h.spatial.standard_error > 0.0);
  CHECK(h.spatial.separations.front() == doctest::Approx(1.0 / 128));
  CHECK(h.temporal.second_moments.size() == 5);
  CHECK_THROWS(increment_scaling_fit(CovarianceSpec(1, 3.5, 4), 200, 4));
}

TEST_CASE("two root seeds: stable mean, uncorrelated sub-streams") {
  CampaignConfig cfg;
  cfg.spec = CovarianceSpec(1, 1.4, 8);
  cfg.n_x = 32;
  cfg.dt = 1.0 / 256;
  cfg.alpha = 0.15;
  cfg.realizations = 5000;
  cfg.root_seed = 101;
  const auto a = run_campaign(cfg);
  cfg.root_seed = 202;
  const auto b = run_campaign(cfg);
  CHECK(std::abs(a.grad_v.mean - b.grad_v.mean) <= 0.05 * a.grad_v.mean);

  // Lag-one correlation between neighbouring realizations.
  const auto& r = a.records;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    sxy += (r[i].grad_v - a.grad_v.mean) * (r[i + 1].grad_v - a.grad_v.mean);
    sxx += (r[i].grad_v - a.grad_v.mean) * (r[i].grad_v - a.grad_v.mean);
  }
  CHECK(std::abs(sxy / sxx) <= 3.0 / std::sqrt(5000.0));
}

TEST_CASE("increment slopes agree across root seeds") {
  const CovarianceSpec spec(1, 1.5, 63);
  ScalingConfig cfg;
  cfg.n_x = 128;
  cfg.spatial_offsets = {1, 2, 4, 8};
  cfg.t_start = 1.0 - 1.0 / 64;
  cfg.dt = 1.0 / 1024;
  cfg.n_times = 17;
  cfg.temporal_lags = {1, 2, 4, 8, 16};
  cfg.batches = 10;
  const auto a = increment_scaling_fit(spec, 400, 11, cfg);
  const auto b = increment_scaling_fit(spec, 400, 12, cfg);
  auto agree = [](const SlopeFit& x, const SlopeFit& y) {
    return std::abs(x.slope - y.slope) <= 2.0 * std::hypot(x.standard_error, y.standard_error);
  };
  CHECK(agree(a.spatial, b.spatial));
  CHECK(agree(a.temporal, b.temporal));
}

TEST_CASE("covariance gate holds for 19 of 20 root seeds") {
  const CovarianceSpec spec(1, 2.0, 32);
  std::vector<CovariancePoint> points;
  for (double t : {0.25, 0.5, 1.0})
    for (double tp : {0.25, 0.5, 1.0})
      if (tp <= t)
        for (double r : {0.0, 0.125}) points.push_back({t, r, tp, 0.0});
  int passes = 0;
  for (std::uint64_t seed = 1000; seed < 1020; ++seed) passes += covariance_check(spec, points, 20000, seed).pass;
  CHECK(passes >= 19);
}
