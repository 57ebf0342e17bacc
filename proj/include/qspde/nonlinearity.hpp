#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace qspde {

enum class NonlinearityKind { identity, tanh_perturbed, custom };

/// Flux nonlinearity A : R^d -> R^d together with its derivative DA.
///
/// The declared constants are the ellipticity contrast lambda, with
/// xi.DA(q)xi >= lambda|xi|^2 and |DA(q)xi| <= |xi|, and the Lipschitz
/// constant Lambda of q -> DA(q) in operator norm.
class Nonlinearity {
 public:
  using FluxFn = std::function<void(std::span<const double> q, std::span<double> out)>;
  /// Writes DA(q) row-major into a d*d buffer.
  using JacobianFn = std::function<void(std::span<const double> q, std::span<double> out)>;

  static Nonlinearity identity();
  /// A(q)_i = lambda q_i + (1 - lambda) tanh(q_i).
  static Nonlinearity tanh_perturbed(double lambda);
  static Nonlinearity custom(std::string name, FluxFn flux, JacobianFn jacobian, double lambda,
                             double lipschitz);

  NonlinearityKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double lambda() const { return lambda_; }
  double lipschitz() const { return lipschitz_; }
  /// True when A_i depends on q_i only.
  bool is_diagonal() const { return kind_ != NonlinearityKind::custom; }

  void flux(std::span<const double> q, std::span<double> out) const;
  void jacobian(std::span<const double> q, std::span<double> out) const;

  /// Component i of A(q), valid only for diagonal nonlinearities.
  double diagonal_flux(double q) const {
    if (kind_ == NonlinearityKind::identity) return q;
    return lambda_ * q + (1.0 - lambda_) * std::tanh(q);
  }

 private:
  Nonlinearity() = default;
  NonlinearityKind kind_ = NonlinearityKind::identity;
  std::string name_ = "identity";
  double lambda_ = 1.0;
  double lipschitz_ = 0.0;
  FluxFn flux_;
  JacobianFn jacobian_;
};

/// max_q |d/dq sech^2(q)| = 4 / (3 sqrt 3), attained where tanh^2(q) = 1/3.
inline constexpr double kMaxSech2Slope = 0.76980035891950104;

Nonlinearity builtin(NonlinearityKind kind, double lambda);
Nonlinearity builtin(const std::string& kind, double lambda);

/// a(q1,q2) = int_0^1 DA(theta q2 + (1 - theta) q1) dtheta by 8-node Gauss-Legendre
/// quadrature; row-major d*d.
std::vector<double> secant_coefficient(const Nonlinearity& nl, std::span<const double> q1,
                                       std::span<const double> q2);

struct EllipticityViolation {
  std::string condition;
  std::vector<double> q;
  std::vector<double> q_prime;
  std::vector<double> xi;
  double value = 0.0;
  double bound = 0.0;
};

struct EllipticityReport {
  std::string nonlinearity;
  int dim = 0;
  std::int64_t samples = 0;
  double min_rayleigh = 0.0;
  double max_norm_ratio = 0.0;
  double max_lipschitz_ratio = 0.0;
  double declared_lambda = 0.0;
  double declared_lipschitz = 0.0;
  bool pass = false;
  std::int64_t violation_count = 0;
  /// First violations in sampling order (at most 16).
  std::vector<EllipticityViolation> violations;
};

/// Samples q, q' uniformly in the ball of `radius` and xi on the unit sphere and checks
/// the declared ellipticity and Lipschitz constants. Violations are reported, not thrown.
EllipticityReport verify_ellipticity(const Nonlinearity& nl, int dim, std::int64_t n_samples,
                                     double radius, std::uint64_t seed);

}  // namespace qspde
