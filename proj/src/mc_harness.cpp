#include "qspde/mc_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "qspde/hoelder.hpp"
#include "qspde/rng.hpp"

namespace qspde {

namespace {

using Clock = std::chrono::steady_clock;

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

TailFit to_tail(const std::vector<double>& lx, const std::vector<double>& ly) {
  if (lx.size() < 2) throw std::invalid_argument("tail_fit: fewer than two usable tail points");
  const LineFit line = fit_line(lx, ly);
  TailFit t;
  t.p = line.slope;
  t.c = std::exp(-line.intercept / line.slope);
  t.points = lx.size();
  t.r_squared = line.r_squared;
  return t;
}

std::optional<TailFit> optional_tail(const std::vector<double>& values) {
  if (values.size() < kMinTailSamples) return std::nullopt;
  try {
    return tail_fit(values);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

// Grid of the norm fields: the solver's output grid when solving, the campaign grid otherwise.
TimeAxis sampling_axis(const CampaignConfig& cfg, std::size_t& n_x) {
  if (cfg.solver) {
    const auto& s = *cfg.solver;
    n_x = s.n_x;
    return {s.steps() / s.output_stride + 1, s.dt * static_cast<double>(s.output_stride), 0.0};
  }
  n_x = cfg.n_x;
  const double steps = std::round(cfg.t_end / cfg.dt);
  if (steps < 1.0 || std::abs(steps * cfg.dt - cfg.t_end) > 1e-12 * cfg.t_end)
    throw std::invalid_argument("campaign: t_end must be a positive multiple of dt");
  return {static_cast<std::size_t>(steps) + 1, cfg.dt, 0.0};
}

}  // namespace

std::uint64_t realization_seed(std::uint64_t root, std::size_t index) { return derive_seed(root, index); }

RealizationRecord run_realization(const CampaignConfig& cfg, std::size_t index) {
  RealizationRecord rec;
  rec.index = index;
  rec.seed = realization_seed(cfg.root_seed, index);
  const auto start = Clock::now();
  try {
    const int dim = cfg.spec.dim();
    if (cfg.solver) {
      const Trajectory traj = solve(*cfg.solver, cfg.spec, rec.seed, cfg.j);
      rec.grad_v = gradient_seminorm(traj.grad_v, cfg.alpha);
      const auto grad_w = centered_gradient(traj.w);
      std::vector<Field> grad_u;
      for (int a = 0; a < dim; ++a)
        grad_u.push_back(axpy(grad_w[static_cast<std::size_t>(a)], 1.0, traj.grad_v[static_cast<std::size_t>(a)]));
      rec.grad_u = gradient_seminorm(grad_u, cfg.alpha);
      rec.remainder = c1alpha_seminorm(traj.w, grad_w, cfg.alpha);
    } else {
      std::size_t n_x = 0;
      const TimeAxis axis = sampling_axis(cfg, n_x);
      const NoisePath path = sample_noise_path(cfg.spec, axis, rec.seed);
      std::vector<Field> grad;
      for (int a = 0; a < dim; ++a) grad.push_back(evaluate_field(path, n_x, Component::gradient(a)));
      rec.grad_v = gradient_seminorm(grad, cfg.alpha);
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rec;
}

McStats run_campaign(const CampaignConfig& cfg) {
  if (cfg.realizations < 1) throw std::invalid_argument("campaign: at least one realization is required");
  if (cfg.solver) validate(*cfg.solver, cfg.spec.dim());
  {
    std::size_t n_x = 0;
    sampling_axis(cfg, n_x);
  }
  McStats stats;
  stats.n = cfg.realizations;
  stats.records.resize(cfg.realizations);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.realizations; i = next++) stats.records[i] = run_realization(cfg, i);
  };
  const std::size_t workers = std::clamp<std::size_t>(cfg.workers, 1, cfg.realizations);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<double> gv, gu, rem;
  for (const auto& r : stats.records) {
    if (r.failed) {
      ++stats.failures;
      continue;
    }
    gv.push_back(r.grad_v);
    if (r.grad_u) gu.push_back(*r.grad_u);
    if (r.remainder) rem.push_back(*r.remainder);
  }
  stats.failed = static_cast<double>(stats.failures) > kMaxFailureFraction * static_cast<double>(stats.n);
  stats.grad_v = moments(gv);
  stats.grad_v_tail = optional_tail(gv);
  if (!gu.empty()) {
    stats.grad_u = moments(gu);
    stats.grad_u_tail = optional_tail(gu);
  }
  if (!rem.empty()) {
    stats.remainder = moments(rem);
    stats.remainder_tail = optional_tail(rem);
  }
  return stats;
}

Moments moments(const std::vector<double>& values) {
  Moments m;
  m.count = values.size();
  if (values.empty()) return m;
  m.min = *std::min_element(values.begin(), values.end());
  m.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

TailFit tail_fit(std::vector<double> samples) {
  if (samples.size() < kMinTailSamples)
    throw std::invalid_argument("tail_fit: at least " + std::to_string(kMinTailSamples) + " samples required, got " +
                                std::to_string(samples.size()));
  std::sort(samples.begin(), samples.end());
  if (samples.front() == samples.back()) throw std::invalid_argument("tail_fit: degenerate samples (all equal)");
  const std::size_t n = samples.size();
  std::vector<double> lx, ly;
  for (std::size_t i = (3 * n) / 4; i + 1 < n; ++i) {
    const double m = samples[i];
    if (!(m > 0.0)) continue;
    const double s = static_cast<double>(n - i) / static_cast<double>(n);
    lx.push_back(std::log(m));
    ly.push_back(std::log(-std::log(s)));
  }
  return to_tail(lx, ly);
}

TailFit tail_fit_survival(const std::vector<double>& m, const std::vector<double>& survival) {
  if (m.size() != survival.size()) throw std::invalid_argument("tail_fit_survival: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(m[i] > 0.0) || !(survival[i] > 0.0 && survival[i] < 1.0)) continue;
    lx.push_back(std::log(m[i]));
    ly.push_back(std::log(-std::log(survival[i])));
  }
  return to_tail(lx, ly);
}

CovarianceReport covariance_check(const CovarianceSpec& spec, const std::vector<CovariancePoint>& points,
                                  std::size_t n, std::uint64_t seed, int axis) {
  if (n < 2) throw std::invalid_argument("covariance_check: at least two realizations are required");
  if (axis < 0 || axis >= spec.dim()) throw std::invalid_argument("covariance_check: axis out of range");
  for (const auto& p : points)
    if (p.t < 0.0 || p.t > 1.0 || p.t_prime < 0.0 || p.t_prime > 1.0)
      throw std::invalid_argument("covariance_check: times must lie in [0,1]");

  // Distinct (time, position) evaluation sites, visited in time order.
  std::map<std::pair<double, double>, std::size_t> site_index;
  for (const auto& p : points) {
    site_index.emplace(std::make_pair(p.t, p.x), 0);
    site_index.emplace(std::make_pair(p.t_prime, p.x_prime), 0);
  }
  std::vector<std::pair<double, double>> sites;
  for (auto& [key, idx] : site_index) {
    idx = sites.size();
    sites.push_back(key);
  }

  const ModeSet& modes = spec.modes();
  const std::size_t m = modes.size();
  // c_k(x) = i k_axis e^{i k_axis x}; all other axes sit at 0.
  std::vector<std::vector<std::complex<double>>> phase(sites.size(), std::vector<std::complex<double>>(m));
  for (std::size_t s = 0; s < sites.size(); ++s)
    for (std::size_t i = 0; i < m; ++i) {
      const double k = modes.wavevector(i, axis);
      phase[s][i] = std::complex<double>(0.0, k) * std::polar(1.0, k * sites[s].second);
    }

  std::vector<double> sum(points.size(), 0.0), sum2(points.size(), 0.0);
  std::vector<double> h(sites.size());
  for (std::size_t r = 0; r < n; ++r) {
    NoiseSampler sampler(spec, derive_seed(seed, r));
    for (std::size_t s = 0; s < sites.size(); ++s) {
      sampler.advance_to(sites[s].first);
      const auto c = sampler.coefficients();
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += (c[i] * phase[s][i]).real();
      h[s] = acc;
    }
    for (std::size_t q = 0; q < points.size(); ++q) {
      const auto& p = points[q];
      const double prod = h[site_index.at({p.t, p.x})] * h[site_index.at({p.t_prime, p.x_prime})];
      sum[q] += prod;
      sum2[q] += prod * prod;
    }
  }

  CovarianceReport report;
  report.n = n;
  report.axis = axis;
  report.pass = true;
  const double nn = static_cast<double>(n);
  std::vector<double> offset(static_cast<std::size_t>(spec.dim()), 0.0);
  for (std::size_t q = 0; q < points.size(); ++q) {
    CovarianceResidual res;
    res.point = points[q];
    res.estimate = sum[q] / nn;
    const double var = std::max(0.0, (sum2[q] - nn * res.estimate * res.estimate) / (nn - 1.0));
    res.standard_error = std::sqrt(var / nn);
    offset[static_cast<std::size_t>(axis)] = points[q].x - points[q].x_prime;
    res.oracle = covariance_closed_form(spec, axis, points[q].t, points[q].t_prime, offset);
    const double diff = std::abs(res.estimate - res.oracle);
    if (res.standard_error > 0.0)
      res.ratio = diff / res.standard_error;
    else
      res.ratio = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    report.max_ratio = std::max(report.max_ratio, res.ratio);
    if (!(res.ratio <= kCovarianceGate)) report.pass = false;
    report.residuals.push_back(res);
  }
  return report;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) { return fit_line(x, y).slope; }

ScalingReport increment_scaling_fit(const CovarianceSpec& spec, std::size_t n, std::uint64_t seed,
                                    const ScalingConfig& cfg) {
  if (!(spec.decay() - spec.dim() < 2.0))
    throw std::invalid_argument("increment_scaling_fit: s - d must be below 2");
  if (n < cfg.batches || cfg.batches < 2)
    throw std::invalid_argument("increment_scaling_fit: need at least two batches and one realization per batch");
  if (cfg.n_times < 2) throw std::invalid_argument("increment_scaling_fit: need at least two times");
  for (auto lag : cfg.temporal_lags)
    if (lag == 0 || lag >= cfg.n_times) throw std::invalid_argument("increment_scaling_fit: lag outside the time grid");
  for (auto off : cfg.spatial_offsets)
    if (off == 0 || off >= cfg.n_x) throw std::invalid_argument("increment_scaling_fit: offset outside the grid");

  const TimeAxis axis{cfg.n_times, cfg.dt, cfg.t_start};
  if (axis.t_start < 0.0) throw std::invalid_argument("increment_scaling_fit: t_start must be >= 0");
  const auto ns = cfg.spatial_offsets.size(), nt = cfg.temporal_lags.size();
  // Per-batch accumulated squared increments.
  std::vector<double> spatial(cfg.batches * ns, 0.0), temporal(cfg.batches * nt, 0.0);
  std::vector<std::size_t> batch_count(cfg.batches, 0);

  const int dim = spec.dim();
  SpectralSynthesizer synth(spec.modes(), cfg.n_x);
  Field probe(dim, cfg.n_x, TimeAxis{});
  const std::size_t slab = probe.slab_size();
  const int shift_axis = cfg.component.is_value() ? 0 : cfg.component.gradient_axis;
  std::vector<double> final_slab(slab);
  std::vector<std::size_t> needed{cfg.n_times - 1};
  for (auto lag : cfg.temporal_lags) needed.push_back(cfg.n_times - 1 - lag);
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t b = r * cfg.batches / n;
    ++batch_count[b];
    NoiseSampler sampler(spec, derive_seed(seed, r));
    // Slabs at the lag times, then the reference slab last.
    std::vector<std::vector<double>> lag_slabs(nt, std::vector<double>(slab));
    // The OU update is exact for any step, so only the needed times are visited.
    for (std::size_t step : needed) {
      sampler.advance_to(axis.time(step));
      const std::size_t back = cfg.n_times - 1 - step;
      if (back == 0) {
        synth.synthesize(sampler.coefficients(), cfg.component, final_slab);
      } else {
        const auto it = std::find(cfg.temporal_lags.begin(), cfg.temporal_lags.end(), back);
        synth.synthesize(sampler.coefficients(), cfg.component,
                         lag_slabs[static_cast<std::size_t>(it - cfg.temporal_lags.begin())]);
      }
    }
    for (std::size_t l = 0; l < nt; ++l) {
      double acc = 0.0;
      for (std::size_t x = 0; x < slab; ++x) {
        const double d = final_slab[x] - lag_slabs[l][x];
        acc += d * d;
      }
      temporal[b * nt + l] += acc / static_cast<double>(slab);
    }
    for (std::size_t o = 0; o < ns; ++o) {
      double acc = 0.0;
      for (std::size_t x = 0; x < slab; ++x) {
        const double d = final_slab[probe.shifted(x, shift_axis, static_cast<std::int64_t>(cfg.spatial_offsets[o]))] -
                         final_slab[x];
        acc += d * d;
      }
      spatial[b * ns + o] += acc / static_cast<double>(slab);
    }
  }

  auto fit = [&](const std::vector<double>& acc, std::size_t k, const std::vector<double>& sep) {
    SlopeFit f;
    f.separations = sep;
    f.second_moments.assign(k, 0.0);
    std::vector<double> lx(k);
    for (std::size_t i = 0; i < k; ++i) lx[i] = std::log(sep[i]);
    std::vector<double> batch_slopes;
    for (std::size_t b = 0; b < cfg.batches; ++b) {
      std::vector<double> ly(k);
      for (std::size_t i = 0; i < k; ++i) {
        f.second_moments[i] += acc[b * k + i];
        ly[i] = std::log(acc[b * k + i] / static_cast<double>(batch_count[b]));
      }
      batch_slopes.push_back(ols_slope(lx, ly));
    }
    std::vector<double> ly(k);
    for (std::size_t i = 0; i < k; ++i) {
      f.second_moments[i] /= static_cast<double>(n);
      ly[i] = std::log(f.second_moments[i]);
    }
    f.slope = ols_slope(lx, ly);
    f.standard_error = moments(batch_slopes).stddev / std::sqrt(static_cast<double>(cfg.batches));
    return f;
  };

  std::vector<double> spatial_sep, temporal_sep;
  for (auto o : cfg.spatial_offsets) spatial_sep.push_back(static_cast<double>(o) / static_cast<double>(cfg.n_x));
  for (auto l : cfg.temporal_lags) temporal_sep.push_back(static_cast<double>(l) * cfg.dt);
  ScalingReport report;
  report.spatial = fit(spatial, ns, spatial_sep);
  report.temporal = fit(temporal, nt, temporal_sep);
  return report;
}

}  // namespace qspde
