#pragma once

// Flux-form explicit solver for the remainder w = u - v of
//
//   d_t u - div A(grad u) = d_t v + div j,   u = 0 for t <= 0,
//
// i.e. d_t w = div(A(grad w + grad v) + j) on the periodic torus. d_t v never
// appears because the equation is solved for w.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qspde/field.hpp"
#include "qspde/nonlinearity.hpp"
#include "qspde/spectral_noise.hpp"

namespace qspde {

struct SolverConfig {
  std::size_t n_x = 64;
  double dt = 0.0;
  double t_end = 1.0;
  Nonlinearity nonlinearity = Nonlinearity::identity();
  /// theta in dt <= theta dx^2 / (2d).
  double cfl_safety = 1.0;
  /// Slabs are recorded every output_stride steps.
  std::size_t output_stride = 1;

  double dx() const { return 1.0 / static_cast<double>(n_x); }
  std::size_t steps() const;
};

/// theta dx^2 / (2d).
double max_stable_dt(std::size_t n_x, int dim, double cfl_safety);

/// Throws std::invalid_argument naming every violated constraint.
void validate(const SolverConfig& cfg, int dim);

/// Source of the flux data j.
struct JSource {
  enum class Mode { grad_v_negated, zero, field };
  Mode mode = Mode::grad_v_negated;
  /// Mode::field only: one Field per component, either static (n_t == 1) or one slab per solver step.
  std::vector<Field> components;

  static JSource grad_v_negated() { return {}; }
  static JSource zero() { return {Mode::zero, {}}; }
  static JSource from_field(std::vector<Field> components) { return {Mode::field, std::move(components)}; }
};

/// Thrown when a step produces NaN/Inf.
class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(std::size_t node, std::size_t step, double time);
  std::size_t node() const { return node_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t node_;
  std::size_t step_;
};

/// Conservative divergence of the face fluxes F = A(D+w + D+v) + avg(j).
///
/// Normal gradients at faces are forward differences; for non-diagonal A the
/// tangential components are averages of the centred differences at the two
/// adjacent nodes. j is averaged from the adjacent nodes. All inputs are single
/// slabs on the same spatial grid; an empty j means j = 0.
Field flux_divergence(const Field& w, const Field& v, std::span<const Field> j, const Nonlinearity& nl);

/// One explicit Euler step w + dt * flux_divergence(w, v, j). Throws SolverDivergence.
Field step(const Field& w, double dt, const Field& v, std::span<const Field> j, const Nonlinearity& nl,
           std::size_t step_index = 0);

/// Discrete dissipation sum_faces dG.(A(G1 + D+v) - A(G2 + D+v)) dx^d, normal components.
double dissipation(const Field& w1, const Field& w2, const Field& v, const Nonlinearity& nl);

/// Discrete L2 norm (sum f^2 dx^d)^{1/2} of a single slab.
double l2_norm(const Field& f);

struct SolverDiagnostics {
  std::size_t steps = 0;
  double mean_initial = 0.0;
  double max_mean_drift = 0.0;
  double drift_per_unit_time = 0.0;
  double wall_seconds = 0.0;
};

/// Recorded solve: w, v and grad v at the output times.
struct Trajectory {
  Field w;
  Field v;
  std::vector<Field> grad_v;
  SolverDiagnostics diagnostics;

  Field u() const { return axpy(w, 1.0, v); }
};

struct SolveOptions {
  /// Initial remainder; zero when absent.
  std::optional<Field> initial_w;
};

/// Marches from w(0) to t_end sampling v exactly at every solver time.
Trajectory solve(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed, const JSource& j,
                 const SolveOptions& options = {});

/// As above from a pre-sampled path whose time grid refines the solver grid.
Trajectory solve(const SolverConfig& cfg, const NoisePath& noise, const JSource& j,
                 const SolveOptions& options = {});

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> distance;     // ||w1 - w2||_2 at each step
  std::vector<double> dissipation;  // D(t) at each step
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double min_dissipation = 0.0;
  double max_mean_drift = 0.0;
  double drift_per_unit_time = 0.0;
  bool dissipation_nonnegative = false;
  bool contracting = false;
  bool pass = false;
};

/// Tolerance on D(t) >= 0.
inline constexpr double kDissipationTolerance = 1e-10;

/// Two solves with identical noise whose initial remainders differ by `perturbation`.
ContractionReport contraction_test(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed,
                                   const JSource& j, const Field& perturbation);

/// Random mean-zero perturbation with max |delta| = epsilon.
ContractionReport contraction_test(const SolverConfig& cfg, const CovarianceSpec& spec, std::uint64_t seed,
                                   const JSource& j, double epsilon, std::uint64_t perturbation_seed);

/// Random mean-zero single slab with max |delta| = epsilon (epsilon = 0 gives zeros).
Field mean_zero_perturbation(int dim, std::size_t n_x, double epsilon, std::uint64_t seed);

}  // namespace qspde
