#include "qspde/nonlinearity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qspde/rng.hpp"

namespace qspde {

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("nonlinearity: lambda must lie in (0,1], got " + std::to_string(lambda));
}

double sech2(double q) {
  const double c = std::cosh(q);
  return 1.0 / (c * c);
}

// 8-node Gauss-Legendre rule mapped to [0,1].
struct GaussLegendre8 {
  std::array<double, 8> node{};
  std::array<double, 8> weight{};
  GaussLegendre8() {
    constexpr std::array<double, 4> x = {0.18343464249564980494, 0.52553240991632898582,
                                         0.79666647741362673959, 0.96028985649753623168};
    constexpr std::array<double, 4> w = {0.36268378337836198297, 0.31370664587788728734,
                                         0.22238103445337447054, 0.10122853629037625915};
    for (std::size_t i = 0; i < 4; ++i) {
      node[2 * i] = 0.5 * (1.0 - x[i]);
      node[2 * i + 1] = 0.5 * (1.0 + x[i]);
      weight[2 * i] = weight[2 * i + 1] = 0.5 * w[i];
    }
  }
};

using Matrix = Eigen::MatrixXd;

Matrix jacobian_matrix(const Nonlinearity& nl, std::span<const double> q) {
  const auto d = static_cast<Eigen::Index>(q.size());
  std::vector<double> buf(q.size() * q.size());
  nl.jacobian(q, buf);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(buf.data(), d, d);
}

double operator_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

void sample_sphere(GaussianStream& rng, std::span<double> out) {
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& c : out) {
      c = rng.standard_normal();
      n2 += c * c;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& c : out) c *= inv;
}

void sample_ball(GaussianStream& rng, double radius, std::span<double> out) {
  sample_sphere(rng, out);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(out.size()));
  for (double& c : out) c *= r;
}

}  // namespace

Nonlinearity Nonlinearity::identity() { return Nonlinearity(); }

Nonlinearity Nonlinearity::tanh_perturbed(double lambda) {
  check_lambda(lambda);
  Nonlinearity nl;
  nl.kind_ = NonlinearityKind::tanh_perturbed;
  nl.name_ = "tanh_perturbed";
  nl.lambda_ = lambda;
  nl.lipschitz_ = (1.0 - lambda) * kMaxSech2Slope;
  return nl;
}

Nonlinearity Nonlinearity::custom(std::string name, FluxFn flux, JacobianFn jacobian, double lambda,
                                  double lipschitz) {
  if (!flux || !jacobian) throw std::invalid_argument("nonlinearity: custom evaluators must be set");
  if (!(lambda > 0.0)) throw std::invalid_argument("nonlinearity: declared lambda must be positive");
  if (!(lipschitz >= 0.0)) throw std::invalid_argument("nonlinearity: declared Lipschitz constant must be >= 0");
  Nonlinearity nl;
  nl.kind_ = NonlinearityKind::custom;
  nl.name_ = std::move(name);
  nl.lambda_ = lambda;
  nl.lipschitz_ = lipschitz;
  nl.flux_ = std::move(flux);
  nl.jacobian_ = std::move(jacobian);
  return nl;
}

void Nonlinearity::flux(std::span<const double> q, std::span<double> out) const {
  if (kind_ == NonlinearityKind::custom) {
    flux_(q, out);
    return;
  }
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = diagonal_flux(q[i]);
}

void Nonlinearity::jacobian(std::span<const double> q, std::span<double> out) const {
  if (kind_ == NonlinearityKind::custom) {
    jacobian_(q, out);
    return;
  }
  const std::size_t d = q.size();
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d * d), 0.0);
  for (std::size_t i = 0; i < d; ++i)
    out[i * d + i] = kind_ == NonlinearityKind::identity ? 1.0 : lambda_ + (1.0 - lambda_) * sech2(q[i]);
}

Nonlinearity builtin(NonlinearityKind kind, double lambda) {
  check_lambda(lambda);
  switch (kind) {
    case NonlinearityKind::identity:
      return Nonlinearity::identity();
    case NonlinearityKind::tanh_perturbed:
      return Nonlinearity::tanh_perturbed(lambda);
    case NonlinearityKind::custom:
      break;
  }
  throw std::invalid_argument("builtin: custom nonlinearities have no builtin instance");
}

Nonlinearity builtin(const std::string& kind, double lambda) {
  if (kind == "identity") return builtin(NonlinearityKind::identity, lambda);
  if (kind == "tanh_perturbed") return builtin(NonlinearityKind::tanh_perturbed, lambda);
  throw std::invalid_argument("builtin: unknown nonlinearity '" + kind + "' (identity | tanh_perturbed)");
}

std::vector<double> secant_coefficient(const Nonlinearity& nl, std::span<const double> q1,
                                       std::span<const double> q2) {
  if (q1.size() != q2.size()) throw std::invalid_argument("secant_coefficient: dimension mismatch");
  static const GaussLegendre8 rule;
  const std::size_t d = q1.size();
  std::vector<double> out(d * d, 0.0), jac(d * d), q(d);
  for (std::size_t n = 0; n < rule.node.size(); ++n) {
    const double theta = rule.node[n];
    for (std::size_t i = 0; i < d; ++i) q[i] = theta * q2[i] + (1.0 - theta) * q1[i];
    nl.jacobian(q, jac);
    for (std::size_t i = 0; i < d * d; ++i) out[i] += rule.weight[n] * jac[i];
  }
  return out;
}

EllipticityReport verify_ellipticity(const Nonlinearity& nl, int dim, std::int64_t n_samples,
                                     double radius, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("verify_ellipticity: dimension must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("verify_ellipticity: n_samples must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("verify_ellipticity: radius must be positive");

  EllipticityReport report;
  report.nonlinearity = nl.name();
  report.dim = dim;
  report.samples = n_samples;
  report.declared_lambda = nl.lambda();
  report.declared_lipschitz = nl.lipschitz();
  report.min_rayleigh = std::numeric_limits<double>::infinity();

  const auto d = static_cast<std::size_t>(dim);
  GaussianStream rng(seed);
  std::vector<double> q(d), qp(d), xi(d);
  const double lower = nl.lambda() - 1e-12;
  const double upper = 1.0 + 1e-12;
  const double lipschitz_bound = nl.lipschitz() * (1.0 + 1e-6);

  auto record = [&](std::string condition, double value, double bound) {
    ++report.violation_count;
    if (report.violations.size() < 16)
      report.violations.push_back({std::move(condition), q, qp, xi, value, bound});
  };

  for (std::int64_t s = 0; s < n_samples; ++s) {
    sample_ball(rng, radius, q);
    sample_ball(rng, radius, qp);
    sample_sphere(rng, xi);
    const Matrix a = jacobian_matrix(nl, q);
    const Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd ax = a * x;
    const double rayleigh = x.dot(ax);
    const double norm_ratio = ax.norm();
    report.min_rayleigh = std::min(report.min_rayleigh, rayleigh);
    report.max_norm_ratio = std::max(report.max_norm_ratio, norm_ratio);
    if (rayleigh < lower) record("lower ellipticity xi.DA(q)xi >= lambda|xi|^2", rayleigh, nl.lambda());
    if (norm_ratio > upper) record("upper bound |DA(q)xi| <= |xi|", norm_ratio, 1.0);

    double dist2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist2 += (qp[i] - q[i]) * (qp[i] - q[i]);
    if (dist2 > 0.0) {
      const double ratio = operator_norm(jacobian_matrix(nl, qp) - a) / std::sqrt(dist2);
      report.max_lipschitz_ratio = std::max(report.max_lipschitz_ratio, ratio);
      if (ratio > lipschitz_bound) record("Lipschitz |DA(q')-DA(q)| <= Lambda|q'-q|", ratio, nl.lipschitz());
    }
  }
  report.pass = report.violation_count == 0;
  return report;
}

}  // namespace qspde
