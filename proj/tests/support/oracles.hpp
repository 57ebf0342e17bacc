#pragma once

// Independent reference implementations used by the tests. They work from real
// coordinates and plain loops and share no code with the library beyond Field.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qspde/field.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// E[d_j v(t,x) d_j v(t',x')] for d = 1 from the explicit double integral
// sum_k Khat k^2 cos(k r) int_0^{t'} e^{-(t-s)k^2} e^{-(t'-s)k^2} ds, t' <= t <= 1,
// with the time integral done by composite Simpson rule in tau = t' - s over the
// window where the kernel exceeds e^{-80}.
inline double gradient_covariance_1d(double s, int kmax, double t, double tp, double r) {
  if (tp > t) std::swap(t, tp);
  double total = 0.0;
  for (int m = -kmax; m <= kmax; ++m) {
    if (m == 0) continue;
    const double k = 2.0 * kPi * m;
    const double kh = std::pow(1.0 + k * k, -s / 2.0);
    const int n = 4000;
    const double h = std::min(tp, 40.0 / (k * k)) / n;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double tau = i * h;
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      integral += w * std::exp(-(t - tp + tau) * k * k) * std::exp(-tau * k * k);
    }
    integral *= h / 3.0;
    total += kh * k * k * std::cos(k * r) * integral;
  }
  return total;
}

inline double periodic_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

inline std::vector<double> coordinates(const qspde::Field& f, std::size_t node) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(f.dim()));
  f.unflatten(node, idx);
  std::vector<double> x(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) x[a] = static_cast<double>(idx[a]) * f.dx();
  return x;
}

inline double distance(double t1, const std::vector<double>& x1, double t2, const std::vector<double>& x2) {
  double s = 0.0;
  for (std::size_t a = 0; a < x1.size(); ++a) {
    const double g = periodic_gap(x1[a], x2[a]);
    s += g * g;
  }
  return std::sqrt(std::abs(t1 - t2)) + std::sqrt(s);
}

// sup over all sample pairs.
inline double naive_seminorm(const qspde::Field& f, double alpha) {
  double best = 0.0;
  for (std::size_t n1 = 0; n1 < f.n_t(); ++n1)
    for (std::size_t p = 0; p < f.slab_size(); ++p)
      for (std::size_t n2 = 0; n2 < f.n_t(); ++n2)
        for (std::size_t q = 0; q < f.slab_size(); ++q) {
          if (n1 == n2 && p == q) continue;
          const double d = distance(f.time(n1), coordinates(f, p), f.time(n2), coordinates(f, q));
          best = std::max(best, std::abs(f(n1, p) - f(n2, q)) / std::pow(d, alpha));
        }
  return best;
}

// Dyadic estimator from the definition, on real coordinates: lattice points of
// (R^2 Z) x (R Z)^d, pairs with |t - s| <= 3 R^2 and periodic |x - y|_inf <= R.
inline double dyadic_seminorm(const qspde::Field& f, double alpha) {
  const double eps = 1e-9;
  double best = 0.0;
  for (double r = 0.5; r >= f.dx() - eps && (f.n_t() == 1 || r * r >= f.dt() - eps); r /= 2) {
    double level = 0.0;
    for (std::size_t n1 = 0; n1 < f.n_t(); ++n1) {
      const double t1 = f.time(n1) - f.t_start();
      if (f.n_t() > 1 && std::abs(std::remainder(t1, r * r)) > eps) continue;
      for (std::size_t p = 0; p < f.slab_size(); ++p) {
        const auto x1 = coordinates(f, p);
        bool on = true;
        for (double c : x1) on = on && std::abs(std::remainder(c, r)) < eps;
        if (!on) continue;
        for (std::size_t n2 = 0; n2 < f.n_t(); ++n2) {
          const double t2 = f.time(n2) - f.t_start();
          if (f.n_t() > 1 && std::abs(std::remainder(t2, r * r)) > eps) continue;
          if (std::abs(t2 - t1) > 3 * r * r + eps) continue;
          for (std::size_t q = 0; q < f.slab_size(); ++q) {
            const auto x2 = coordinates(f, q);
            bool ok = true;
            for (std::size_t a = 0; a < x2.size(); ++a)
              ok = ok && std::abs(std::remainder(x2[a], r)) < eps && periodic_gap(x1[a], x2[a]) <= r + eps;
            if (!ok) continue;
            level = std::max(level, std::abs(f(n1, p) - f(n2, q)));
          }
        }
      }
    }
    best = std::max(best, level * std::pow(r, -alpha));
  }
  return best;
}

inline double temporal_quotient(const qspde::Field& w, double alpha) {
  double best = 0.0;
  for (std::size_t x = 0; x < w.slab_size(); ++x)
    for (std::size_t a = 0; a < w.n_t(); ++a)
      for (std::size_t b = a + 1; b < w.n_t(); ++b)
        best = std::max(best, std::abs(w(b, x) - w(a, x)) /
                                  std::pow(std::sqrt((b - a) * w.dt()), 1.0 + alpha));
  return best;
}

// Survival function of |Z|, Z standard normal.
inline double half_normal_survival(double m) { return std::erfc(m / std::sqrt(2.0)); }

}  // namespace oracle
