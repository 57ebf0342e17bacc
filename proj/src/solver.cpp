#include "qspde/solver.hpp"

#include <algorithm>
#include <limits>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "qspde/rng.hpp"

namespace qspde {

namespace {

// Neighbour tables and face-flux scratch for one spatial grid.
class FluxAssembler {
 public:
  FluxAssembler(int dim, std::size_t n_x) : dim_(dim), probe_(dim, n_x, TimeAxis{}) {
    const auto nodes = probe_.slab_size();
    plus_.resize(static_cast<std::size_t>(dim));
    minus_.resize(static_cast<std::size_t>(dim));
    for (int a = 0; a < dim; ++a) {
      auto& p = plus_[static_cast<std::size_t>(a)];
      auto& m = minus_[static_cast<std::size_t>(a)];
      p.resize(nodes);
      m.resize(nodes);
      for (std::size_t i = 0; i < nodes; ++i) {
        p[i] = probe_.shifted(i, a, 1);
        m[i] = probe_.shifted(i, a, -1);
      }
    }
    face_flux_.assign(nodes * static_cast<std::size_t>(dim), 0.0);
    q_.resize(static_cast<std::size_t>(dim));
    a_.resize(static_cast<std::size_t>(dim));
  }

  std::size_t nodes() const { return probe_.slab_size(); }
  double dx() const { return probe_.dx(); }

  // Gradient of f at the face (i, i + e_axis) into q: normal forward difference,
  // tangential averaged centred differences.
  void face_gradient(std::span<const double> f, std::size_t i, int axis, std::span<double> q) const {
    const double inv_dx = 1.0 / dx();
    const auto ax = static_cast<std::size_t>(axis);
    const std::size_t ip = plus_[ax][i];
    for (int b = 0; b < dim_; ++b) {
      const auto bx = static_cast<std::size_t>(b);
      if (b == axis) {
        q[bx] = (f[ip] - f[i]) * inv_dx;
      } else {
        const double c0 = f[plus_[bx][i]] - f[minus_[bx][i]];
        const double c1 = f[plus_[bx][ip]] - f[minus_[bx][ip]];
        q[bx] = 0.25 * (c0 + c1) * inv_dx;
      }
    }
  }

  // Face fluxes F_a(i) = A_a(D+w + D+v) + avg(j_a) for every axis.
  void assemble_fluxes(std::span<const double> w, std::span<const double> v, std::span<const Field> j,
                       const Nonlinearity& nl) {
    const double inv_dx = 1.0 / dx();
    const auto n = nodes();
    for (int a = 0; a < dim_; ++a) {
      const auto ax = static_cast<std::size_t>(a);
      const auto& p = plus_[ax];
      double* flux = face_flux_.data() + ax * n;
      if (nl.is_diagonal()) {
        for (std::size_t i = 0; i < n; ++i) {
          const double g = (w[p[i]] - w[i]) * inv_dx + (v[p[i]] - v[i]) * inv_dx;
          flux[i] = nl.diagonal_flux(g);
        }
      } else {
        std::vector<double> qv(static_cast<std::size_t>(dim_));
        for (std::size_t i = 0; i < n; ++i) {
          face_gradient(w, i, a, q_);
          face_gradient(v, i, a, qv);
          for (std::size_t b = 0; b < q_.size(); ++b) q_[b] += qv[b];
          nl.flux(q_, a_);
          flux[i] = a_[ax];
        }
      }
      if (!j.empty()) {
        const auto js = j[ax].slab(0);
        for (std::size_t i = 0; i < n; ++i) flux[i] += 0.5 * (js[i] + js[p[i]]);
      }
    }
  }

  // out = sum_a (F_a(i) - F_a(i - e_a)) / dx; telescopes to zero over the torus.
  void divergence(std::span<double> out) const {
    const double inv_dx = 1.0 / dx();
    const auto n = nodes();
    std::fill(out.begin(), out.end(), 0.0);
    for (int a = 0; a < dim_; ++a) {
      const auto ax = static_cast<std::size_t>(a);
      const auto& m = minus_[ax];
      const double* flux = face_flux_.data() + ax * n;
      for (std::size_t i = 0; i < n; ++i) out[i] += (flux[i] - flux[m[i]]) * inv_dx;
    }
  }

  // sum over faces of dG_a (A_a(q1) - A_a(q2)) dx^d.
  double dissipation(std::span<const double> w1, std::span<const double> w2, std::span<const double> v,
                     const Nonlinearity& nl) {
    const double inv_dx = 1.0 / dx();
    const double cell = std::pow(dx(), dim_);
    const auto n = nodes();
    std::vector<double> q2(static_cast<std::size_t>(dim_)), qv(static_cast<std::size_t>(dim_)),
        a2(static_cast<std::size_t>(dim_));
    double sum = 0.0;
    for (int a = 0; a < dim_; ++a) {
      const auto ax = static_cast<std::size_t>(a);
      const auto& p = plus_[ax];
      for (std::size_t i = 0; i < n; ++i) {
        const double gv = (v[p[i]] - v[i]) * inv_dx;
        const double g1 = (w1[p[i]] - w1[i]) * inv_dx;
        const double g2 = (w2[p[i]] - w2[i]) * inv_dx;
        double f1 = 0.0, f2 = 0.0;
        if (nl.is_diagonal()) {
          f1 = nl.diagonal_flux(g1 + gv);
          f2 = nl.diagonal_flux(g2 + gv);
        } else {
          face_gradient(w1, i, a, q_);
          face_gradient(w2, i, a, q2);
          face_gradient(v, i, a, qv);
          for (std::size_t b = 0; b < qv.size(); ++b) {
            q_[b] += qv[b];
            q2[b] += qv[b];
          }
          nl.flux(q_, a_);
          f1 = a_[ax];
          nl.flux(q2, a2);
          f2 = a2[ax];
        }
        sum += (g1 - g2) * (f1 - f2);
      }
    }
    return sum * cell;
  }

 private:
  int dim_;
  Field probe_;
  std::vector<std::vector<std::size_t>> plus_;
  std::vector<std::vector<std::size_t>> minus_;
  std::vector<double> face_flux_;
  std::vector<double> q_;
  std::vector<double> a_;
};

void check_slab(const Field& f, const Field& reference, const char* what) {
  if (!f.same_space(reference) || f.n_t() != 1)
    throw std::invalid_argument(std::string("solver: ") + what + " does not match the grid of w");
}

// Supplies v, grad v and j at each solver step.
class Forcing {
 public:
  Forcing(const CovarianceSpec& spec, std::uint64_t seed, std::size_t n_x, const JSource& j)
      : spec_(spec), sampler_(std::make_unique<NoiseSampler>(spec, seed)), n_x_(n_x), j_(j) {
    init();
  }
  Forcing(const NoisePath& path, std::size_t ratio, std::size_t n_x, const JSource& j)
      : spec_(path.spec), path_(&path), ratio_(ratio), n_x_(n_x), j_(j) {
    init();
  }

  void load(std::size_t step, double t) {
    std::span<const std::complex<double>> c;
    if (path_ != nullptr) {
      c = path_->at(step * ratio_);
    } else {
      sampler_->advance_to(t);
      c = sampler_->coefficients();
    }
    synth_->synthesize(c, Component::value(), v_.slab(0));
    for (int a = 0; a < dim(); ++a)
      synth_->synthesize(c, Component::gradient(a), grad_v_[static_cast<std::size_t>(a)].slab(0));
    switch (j_.mode) {
      case JSource::Mode::zero:
        break;
      case JSource::Mode::grad_v_negated:
        for (std::size_t a = 0; a < j_slab_.size(); ++a) {
          auto dst = j_slab_[a].slab(0);
          const auto src = grad_v_[a].slab(0);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = -src[i];
        }
        break;
      case JSource::Mode::field:
        for (std::size_t a = 0; a < j_slab_.size(); ++a) {
          const auto& comp = j_.components[a];
          const auto src = comp.slab(comp.n_t() == 1 ? 0 : step);
          std::copy(src.begin(), src.end(), j_slab_[a].slab(0).begin());
        }
        break;
    }
  }

  int dim() const { return spec_.dim(); }
  const Field& v() const { return v_; }
  const std::vector<Field>& grad_v() const { return grad_v_; }
  std::span<const Field> j() const {
    if (j_.mode == JSource::Mode::zero) return {};
    return j_slab_;
  }

 private:
  void init() {
    synth_ = std::make_unique<SpectralSynthesizer>(spec_.modes(), n_x_);
    v_ = Field(dim(), n_x_, TimeAxis{});
    grad_v_.assign(static_cast<std::size_t>(dim()), v_);
    if (j_.mode != JSource::Mode::zero) j_slab_.assign(static_cast<std::size_t>(dim()), v_);
    if (j_.mode == JSource::Mode::field) {
      if (j_.components.size() != static_cast<std::size_t>(dim()))
        throw std::invalid_argument("solver: j field needs one component per dimension");
      for (const auto& c : j_.components)
        if (!c.same_space(v_)) throw std::invalid_argument("solver: j field grid mismatch");
    }
  }

  CovarianceSpec spec_;
  std::unique_ptr<NoiseSampler> sampler_;
  const NoisePath* path_ = nullptr;
  std::size_t ratio_ = 1;
  std::size_t n_x_;
  JSource j_;
  std::unique_ptr<SpectralSynthesizer> synth_;
  Field v_;
  std::vector<Field> grad_v_;
  std::vector<Field> j_slab_;
};

void check_j_steps(const JSource& j, std::size_t steps) {
  if (j.mode != JSource::Mode::field) return;
  for (const auto& c : j.components)
    if (c.n_t() != 1 && c.n_t() < steps + 1)
      throw std::invalid_argument("solver: time-dependent j field must provide one slab per solver step");
}

Trajectory march(const SolverConfig& cfg, Forcing& forcing, const SolveOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const int dim = forcing.dim();
  const std::size_t steps = cfg.steps();
  const std::size_t outputs = steps / cfg.output_stride + 1;
  const TimeAxis out_axis{outputs, cfg.dt * static_cast<double>(cfg.output_stride), 0.0};

  Trajectory traj;
  traj.w = Field(dim, cfg.n_x, out_axis);
  traj.v = Field(dim, cfg.n_x, out_axis);
  traj.grad_v.assign(static_cast<std::size_t>(dim), traj.w);

  Field w(dim, cfg.n_x, TimeAxis{});
  if (options.initial_w) {
    check_slab(*options.initial_w, w, "initial w");
    std::copy(options.initial_w->data().begin(), options.initial_w->data().end(), w.data().begin());
  }
  FluxAssembler assembler(dim, cfg.n_x);
  Field div(dim, cfg.n_x, TimeAxis{});

  auto record = [&](std::size_t slot) {
    std::copy(w.data().begin(), w.data().end(), traj.w.slab(slot).begin());
    const auto v = forcing.v().slab(0);
    std::copy(v.begin(), v.end(), traj.v.slab(slot).begin());
    for (int a = 0; a < dim; ++a) {
      const auto g = forcing.grad_v()[static_cast<std::size_t>(a)].slab(0);
      std::copy(g.begin(), g.end(), traj.grad_v[static_cast<std::size_t>(a)].slab(slot).begin());
    }
  };

  traj.diagnostics.mean_initial = w.mean(0);
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    forcing.load(n, t);
    if (n % cfg.output_stride == 0) record(n / cfg.output_stride);
    if (n == steps) break;
    assembler.assemble_fluxes(w.slab(0), forcing.v().slab(0), forcing.j(), cfg.nonlinearity);
    assembler.divergence(div.slab(0));
    auto wd = w.slab(0);
    const auto dd = div.slab(0);
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += cfg.dt * dd[i];
    if (const auto bad = w.first_non_finite(); bad != w.size()) throw SolverDivergence(bad, n + 1, t + cfg.dt);
    traj.diagnostics.max_mean_drift =
        std::max(traj.diagnostics.max_mean_drift, std::abs(w.mean(0) - traj.diagnostics.mean_initial));
  }
  traj.diagnostics.steps = steps;
  traj.diagnostics.drift_per_unit_time = traj.diagnostics.max_mean_drift / cfg.t_end;
  traj.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return traj;
}

}  // namespace

std::size_t SolverConfig::steps() const {
  if (!(dt > 0.0)) return 0;
  return static_cast<std::size_t>(std::llround(t_end / dt));
}

double max_stable_dt(std::size_t n_x, int dim, double cfl_safety) {
  const double dx = 1.0 / static_cast<double>(n_x);
  return cfl_safety * dx * dx / (2.0 * dim);
}

void validate(const SolverConfig& cfg, int dim) {
  std::vector<std::string> problems;
  if (cfg.n_x < 2) problems.emplace_back("n_x must be >= 2");
  if (!(cfg.dt > 0.0)) problems.emplace_back("dt must be positive");
  if (!(cfg.t_end > 0.0)) problems.emplace_back("T must be positive");
  if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) problems.emplace_back("CFL safety factor must lie in (0,1]");
  if (cfg.output_stride < 1) problems.emplace_back("output stride must be >= 1");
  if (problems.empty()) {
    const double limit = max_stable_dt(cfg.n_x, dim, cfg.cfl_safety);
    if (cfg.dt > limit * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "CFL violated: dt = " << cfg.dt << " exceeds theta dx^2/(2d) = " << limit;
      problems.push_back(msg.str());
    }
    const auto steps = cfg.steps();
    if (steps == 0 || std::abs(static_cast<double>(steps) * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end)
      problems.emplace_back("T must be a positive integer multiple of dt");
    else if (steps % cfg.output_stride != 0)
      problems.emplace_back("the number of steps must be a multiple of the output stride");
  }
  if (!problems.empty()) {
    std::string all = "invalid solver configuration: ";
    for (std::size_t i = 0; i < problems.size(); ++i) all += (i ? "; " : "") + problems[i];
    throw std::invalid_argument(all);
  }
}

SolverDivergence::SolverDivergence(std::size_t node, std::size_t step, double time)
    : std::runtime_error("solver diverged: first non-finite value at node " + std::to_string(node) +
                         " after step " + std::to_string(step) + " (t = " + std::to_string(time) + ")"),
      node_(node),
      step_(step) {}

Field flux_divergence(const Field& w, const Field& v, std::span<const Field> j, const Nonlinearity& nl) {
  if (w.n_t() != 1) throw std::invalid_argument("flux_divergence: w must be a single slab");
  check_slab(v, w, "v");
  if (!j.empty()) {
    if (j.size() != static_cast<std::size_t>(w.dim()))
      throw std::invalid_argument("flux_divergence: j needs one component per dimension");
    for (const auto& c : j) check_slab(c, w, "j");
  }
  FluxAssembler assembler(w.dim(), w.n_x());
  Field out(w.dim(), w.n_x(), w.time_axis());
  assembler.assemble_fluxes(w.slab(0), v.slab(0), j, nl);
  assembler.divergence(out.slab(0));
  return out;
}

Field step(const Field& w, double dt, const Field& v, std::span<const Field> j, const Nonlinearity& nl,
           std::size_t step_index) {
  if (!(dt >= 0.0)) throw std::invalid_argument("step: dt must be >= 0");
  Field out = axpy(w, dt, flux_divergence(w, v, j, nl));
  if (const auto bad = out.first_non_finite(); bad != out.size())
    throw SolverDivergence(bad, step_index + 1, w.t_start() + dt);
  return out;
}

double dissipation(const Field& w1, const Field& w2, const Field& v, const Nonlinearity& nl) {
  check_slab(w2, w1, "w2");
  check_slab(v, w1, "v");
  FluxAssembler assembler(w1.dim(), w1.n_x());
  return assembler.dissipation(w1.slab(0), w2.slab(0), v.slab(0), nl);
}

double l2_norm(const Field& f) {
  double sum = 0.0;
  for (double x : f.slab(0)) sum += x * x;
  return std::sqrt(sum * std::pow(f.dx(), f.dim()));
}

Trajectory solve(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed, const JSource& j,
                 const SolveOptions& options) {
  validate(cfg, spec.dim());
  check_j_steps(j, cfg.steps());
  Forcing forcing(spec, seed, cfg.n_x, j);
  return march(cfg, forcing, options);
}

Trajectory solve(const SolverConfig& cfg, const NoisePath& noise, const JSource& j, const SolveOptions& options) {
  validate(cfg, noise.spec.dim());
  check_j_steps(j, cfg.steps());
  if (noise.time.t_start != 0.0) throw std::invalid_argument("solve: noise path must start at t = 0");
  const double ratio = cfg.dt / noise.time.dt;
  const auto r = static_cast<std::size_t>(std::llround(ratio));
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio)
    throw std::invalid_argument("solve: noise time grid must refine the solver time grid by an integer factor");
  if ((noise.time.n_t - 1) < cfg.steps() * r)
    throw std::invalid_argument("solve: noise path ends before T");
  Forcing forcing(noise, r, cfg.n_x, j);
  return march(cfg, forcing, options);
}

Field mean_zero_perturbation(int dim, std::size_t n_x, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("perturbation amplitude must be >= 0");
  Field p(dim, n_x, TimeAxis{});
  if (epsilon == 0.0) return p;
  GaussianStream rng(seed);
  auto s = p.slab(0);
  for (double& x : s) x = rng.standard_normal();
  const double mean = p.mean(0);
  double peak = 0.0;
  for (double& x : s) {
    x -= mean;
    peak = std::max(peak, std::abs(x));
  }
  for (double& x : s) x *= epsilon / peak;
  return p;
}

ContractionReport contraction_test(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed,
                                   const JSource& j, const Field& perturbation) {
  validate(cfg, spec.dim());
  check_j_steps(j, cfg.steps());
  Forcing forcing(spec, seed, cfg.n_x, j);
  FluxAssembler assembler(spec.dim(), cfg.n_x);
  Field w1(spec.dim(), cfg.n_x, TimeAxis{});
  check_slab(perturbation, w1, "perturbation");
  Field w2 = axpy(w1, 1.0, perturbation);
  Field div(spec.dim(), cfg.n_x, TimeAxis{});
  const double mean1 = w1.mean(0), mean2 = w2.mean(0);

  ContractionReport report;
  const auto steps = cfg.steps();
  report.min_dissipation = std::numeric_limits<double>::infinity();
  auto advance = [&](Field& w, std::size_t n, double t) {
    assembler.assemble_fluxes(w.slab(0), forcing.v().slab(0), forcing.j(), cfg.nonlinearity);
    assembler.divergence(div.slab(0));
    auto wd = w.slab(0);
    const auto dd = div.slab(0);
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += cfg.dt * dd[i];
    if (const auto bad = w.first_non_finite(); bad != w.size()) throw SolverDivergence(bad, n + 1, t + cfg.dt);
  };
  for (std::size_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * cfg.dt;
    forcing.load(n, t);
    report.times.push_back(t);
    report.distance.push_back(l2_norm(axpy(w1, -1.0, w2)));
    if (n == steps) break;
    const double d = assembler.dissipation(w1.slab(0), w2.slab(0), forcing.v().slab(0), cfg.nonlinearity);
    report.dissipation.push_back(d);
    report.min_dissipation = std::min(report.min_dissipation, d);
    advance(w1, n, t);
    advance(w2, n, t);
    report.max_mean_drift = std::max({report.max_mean_drift, std::abs(w1.mean(0) - mean1),
                                      std::abs(w2.mean(0) - mean2)});
  }
  report.initial_distance = report.distance.front();
  report.final_distance = report.distance.back();
  report.drift_per_unit_time = report.max_mean_drift / cfg.t_end;
  report.dissipation_nonnegative = report.min_dissipation >= -kDissipationTolerance;
  report.contracting = report.final_distance <= report.initial_distance * (1.0 + 1e-12);
  report.pass = report.dissipation_nonnegative && report.contracting;
  return report;
}

ContractionReport contraction_test(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed,
                                   const JSource& j, double epsilon, std::uint64_t perturbation_seed) {
  return contraction_test(cfg, spec, seed, j, mean_zero_perturbation(spec.dim(), cfg.n_x, epsilon, perturbation_seed));
}

}  // namespace qspde
