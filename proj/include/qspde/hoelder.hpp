#pragma once

// Parabolic Hoelder semi-norms of grid fields on [t0, t1] x [0,1)^d, with the
// parabolic distance d((t,x),(t',x')) = sqrt|t - t'| + |x - x'| and minimal-image
// periodic |x - x'|.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qspde/field.hpp"

namespace qspde {

double parabolic_distance(double t1, std::span<const double> x1, double t2, std::span<const double> x2);

/// Two samples (time index, flat node) realising a reported estimate.
struct PairWitness {
  std::size_t time_a = 0;
  std::size_t node_a = 0;
  std::size_t time_b = 0;
  std::size_t node_b = 0;
  /// Dyadic scale R of the witness (dyadic estimator only).
  int level = 0;
};

struct HoelderReport {
  double alpha = 0.0;
  std::optional<double> naive;
  std::optional<PairWitness> naive_pair;
  std::optional<double> theta;
  std::optional<PairWitness> theta_pair;
  std::string domain;
};

/// Quadratic-cost guard for the exhaustive estimator: at most this many samples.
inline constexpr std::size_t kDefaultNaiveBudget = 20000;

/// Pre-calibrated equivalence constant: naive <= kChainingConstant * theta on the
/// random dyadic calibration suite (largest observed ratio plus a 10% margin).
inline constexpr double kChainingConstant = 1.1740909974458067;

/// (sqrt3 + sqrtd)^alpha: theta <= this * naive always.
double dyadic_upper_factor(int dim, double alpha);

/// max over all distinct sample pairs of |f(z) - f(z')| / d^alpha(z, z').
///
/// Pairs are scanned in order of the flat sample index p = time * slab + node,
/// (p, q) with p < q ascending; ties keep the first pair. Throws std::length_error
/// when the field holds more than `budget` samples.
HoelderReport seminorm_naive(const Field& f, double alpha, std::size_t budget = kDefaultNaiveBudget);

/// Dyadic estimator theta = max_R R^{-alpha} max |f(z) - f(z')| over pairs of the
/// lattice (R^2 Z) x (R Z)^d with |t - s| <= 3R^2 and |x - y|_inf <= R, R = 2^-1, 2^-2, ...
/// down to the grid resolution. Requires n_x a power of two and dt a power of two.
HoelderReport seminorm_dyadic(const Field& f, double alpha);

/// Both estimators; the naive one only when the field fits the budget.
HoelderReport hoelder_report(const Field& f, double alpha, std::size_t budget = kDefaultNaiveBudget);

/// Re-evaluates a witness with the estimator's own arithmetic.
double naive_pair_value(const Field& f, double alpha, const PairWitness& pair);
double dyadic_pair_value(const Field& f, double alpha, const PairWitness& pair);

/// Centred differences (w(x + e_a) - w(x - e_a)) / (2 dx) per axis, every slab.
std::vector<Field> centered_gradient(const Field& w);

/// Dyadic [grad]_alpha: max over components.
double gradient_seminorm(std::span<const Field> gradient, double alpha);

/// sup over sites x and times t != t' of |w(t,x) - w(t',x)| / sqrt|t - t'|^{1 + alpha}.
/// Exact; dyadic lag blocks are pruned by a min/max bound.
double temporal_quotient(const Field& w, double alpha);

/// [w]_{1+alpha} = [grad w]_alpha (dyadic) + temporal quotient of w.
double c1alpha_seminorm(const Field& w, std::span<const Field> grad_w, double alpha);

/// One CSV row: alpha,naive,theta,naive_t1,naive_x1,naive_t2,naive_x2,theta_t1,theta_x1,theta_t2,theta_x2,theta_R.
/// Spatial coordinates of d > 1 are joined with ':'; missing values are empty.
std::string csv_header();
std::string to_csv_row(const Field& f, const HoelderReport& report);

}  // namespace qspde
