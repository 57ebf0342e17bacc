#include "qspde/hoelder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace qspde {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("Hoelder exponent alpha must lie in (0,1)");
}

// Minimal-image offset count along one axis.
std::size_t periodic_offset(std::int64_t a, std::int64_t b, std::size_t n_x) {
  const auto n = static_cast<std::int64_t>(n_x);
  std::int64_t o = std::abs(a - b) % n;
  return static_cast<std::size_t>(std::min(o, n - o));
}

double spatial_distance(std::span<const std::size_t> offsets, double dx) {
  double s = 0.0;
  for (auto o : offsets) {
    const double c = static_cast<double>(o) * dx;
    s += c * c;
  }
  return std::sqrt(s);
}

// d^alpha for a time-index gap and per-axis periodic offsets.
double pair_denominator(std::size_t time_gap, double dt, std::span<const std::size_t> offsets, double dx,
                        double alpha) {
  return std::pow(std::sqrt(static_cast<double>(time_gap) * dt) + spatial_distance(offsets, dx), alpha);
}

std::optional<int> exact_log2(double x) {
  if (!(x > 0.0)) return std::nullopt;
  int e = 0;
  if (std::frexp(x, &e) != 0.5) return std::nullopt;
  return e - 1;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

struct DyadicGeometry {
  int spatial_levels = 0;  // n_x = 2^spatial_levels
  int time_exponent = 0;   // dt = 2^-time_exponent
  int levels = 0;          // usable R = 2^-1 .. 2^-levels
};

DyadicGeometry dyadic_geometry(const Field& f) {
  DyadicGeometry g;
  const auto sx = exact_log2(static_cast<double>(f.n_x()));
  if (!sx || *sx < 1) throw std::invalid_argument("dyadic estimator: n_x must be a power of two >= 2");
  g.spatial_levels = *sx;
  if (f.n_t() == 1) {
    g.levels = g.spatial_levels;
    return g;
  }
  const auto e = exact_log2(f.dt());
  if (!e) throw std::invalid_argument("dyadic estimator: dt must be a power of two");
  g.time_exponent = -*e;
  if (g.time_exponent < 2) throw std::invalid_argument("dyadic estimator: dt must be at most 1/4");
  g.levels = std::min(g.spatial_levels, g.time_exponent / 2);
  return g;
}

double level_scale(int level) { return std::ldexp(1.0, -level); }

}  // namespace

double parabolic_distance(double t1, std::span<const double> x1, double t2, std::span<const double> x2) {
  if (x1.size() != x2.size()) throw std::invalid_argument("parabolic_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t a = 0; a < x1.size(); ++a) {
    double d = std::fmod(std::abs(x1[a] - x2[a]), 1.0);
    d = std::min(d, 1.0 - d);
    s += d * d;
  }
  return std::sqrt(std::abs(t1 - t2)) + std::sqrt(s);
}

double dyadic_upper_factor(int dim, double alpha) {
  return std::pow(std::sqrt(3.0) + std::sqrt(static_cast<double>(dim)), alpha);
}

HoelderReport seminorm_naive(const Field& f, double alpha, std::size_t budget) {
  check_alpha(alpha);
  const std::size_t samples = f.size();
  if (samples > budget)
    throw std::length_error("seminorm_naive: " + std::to_string(samples) + " samples exceed the budget of " +
                            std::to_string(budget) + "; use the dyadic estimator");
  const int dim = f.dim();
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t half = f.n_x() / 2 + 1;
  std::size_t classes = 1;
  for (int a = 0; a < dim; ++a) classes *= half;

  // denominators[time_gap * classes + offset class]
  std::vector<double> denominators(f.n_t() * classes);
  std::vector<std::size_t> offsets(d);
  for (std::size_t gap = 0; gap < f.n_t(); ++gap) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::size_t rest = c;
      for (int a = dim - 1; a >= 0; --a) {
        offsets[static_cast<std::size_t>(a)] = rest % half;
        rest /= half;
      }
      denominators[gap * classes + c] = pair_denominator(gap, f.dt(), offsets, f.dx(), alpha);
    }
  }

  const std::size_t slab = f.slab_size();
  std::vector<std::int64_t> coords(slab * d);
  for (std::size_t node = 0; node < slab; ++node) f.unflatten(node, std::span(coords).subspan(node * d, d));
  // class_of[node_a * slab + node_b]
  std::vector<std::size_t> class_of(slab * slab);
  for (std::size_t i = 0; i < slab; ++i)
    for (std::size_t j = 0; j < slab; ++j) {
      std::size_t c = 0;
      for (std::size_t a = 0; a < d; ++a) c = c * half + periodic_offset(coords[i * d + a], coords[j * d + a], f.n_x());
      class_of[i * slab + j] = c;
    }

  const auto values = f.data();
  double best = 0.0;
  PairWitness witness;
  bool found = false;
  for (std::size_t p = 0; p < samples; ++p) {
    const std::size_t tp = p / slab, np = p % slab;
    for (std::size_t q = p + 1; q < samples; ++q) {
      const std::size_t tq = q / slab, nq = q % slab;
      const double ratio = std::abs(values[p] - values[q]) / denominators[(tq - tp) * classes + class_of[np * slab + nq]];
      if (ratio > best || !found) {
        best = ratio;
        witness = {tp, np, tq, nq, 0};
        found = true;
      }
    }
  }
  HoelderReport report;
  report.alpha = alpha;
  report.naive = best;
  if (found) report.naive_pair = witness;
  report.domain = "[" + fmt(f.t_start()) + "," + fmt(f.time(f.n_t() - 1)) + "]x[0,1)^" + std::to_string(dim);
  return report;
}

double naive_pair_value(const Field& f, double alpha, const PairWitness& pair) {
  const auto d = static_cast<std::size_t>(f.dim());
  std::vector<std::int64_t> a(d), b(d);
  f.unflatten(pair.node_a, a);
  f.unflatten(pair.node_b, b);
  std::vector<std::size_t> offsets(d);
  for (std::size_t i = 0; i < d; ++i) offsets[i] = periodic_offset(a[i], b[i], f.n_x());
  const std::size_t gap = pair.time_b > pair.time_a ? pair.time_b - pair.time_a : pair.time_a - pair.time_b;
  return std::abs(f(pair.time_a, pair.node_a) - f(pair.time_b, pair.node_b)) /
         pair_denominator(gap, f.dt(), offsets, f.dx(), alpha);
}

HoelderReport seminorm_dyadic(const Field& f, double alpha) {
  check_alpha(alpha);
  const auto geom = dyadic_geometry(f);
  if (geom.levels < 1) throw std::invalid_argument("dyadic estimator: grid admits no dyadic level");
  const int dim = f.dim();
  const auto d = static_cast<std::size_t>(dim);

  // Spatial neighbour offsets {-1,0,1}^d in lattice units, excluding 0.
  std::vector<std::vector<int>> stencil;
  {
    std::vector<int> o(d, -1);
    while (true) {
      if (std::any_of(o.begin(), o.end(), [](int c) { return c != 0; })) stencil.push_back(o);
      std::size_t a = 0;
      while (a < d && o[a] == 1) o[a++] = -1;
      if (a == d) break;
      ++o[a];
    }
  }

  double best = 0.0;
  PairWitness witness;
  bool found = false;
  std::vector<std::int64_t> idx(d), nb(d);
  for (int level = 1; level <= geom.levels; ++level) {
    const double scale = std::pow(level_scale(level), -alpha);
    const std::size_t sx = f.n_x() >> level;
    const std::size_t st = f.n_t() == 1 ? 1 : std::size_t{1} << (geom.time_exponent - 2 * level);
    const std::size_t lattice = std::size_t{1} << level;
    std::size_t lattice_nodes = 1;
    for (std::size_t a = 0; a < d; ++a) lattice_nodes *= lattice;
    double level_max = 0.0;
    PairWitness level_pair;
    bool level_found = false;
    for (std::size_t t = 0; t < f.n_t(); t += st) {
      for (std::size_t c = 0; c < lattice_nodes; ++c) {
        std::size_t rest = c;
        for (int a = dim - 1; a >= 0; --a) {
          idx[static_cast<std::size_t>(a)] = static_cast<std::int64_t>((rest % lattice) * sx);
          rest /= lattice;
        }
        const std::size_t node = f.node(idx);
        const double here = f(t, node);
        for (std::size_t to = 0; to <= 3; ++to) {
          const std::size_t t2 = t + to * st;
          if (t2 >= f.n_t()) break;
          for (std::size_t s = 0; s <= stencil.size(); ++s) {
            std::size_t node2 = node;
            if (s < stencil.size()) {
              for (std::size_t a = 0; a < d; ++a) nb[a] = idx[a] + stencil[s][a] * static_cast<std::int64_t>(sx);
              node2 = f.node(nb);
            } else if (to == 0) {
              continue;  // the point itself
            }
            const double diff = std::abs(here - f(t2, node2));
            if (diff > level_max || !level_found) {
              level_max = diff;
              level_pair = {t, node, t2, node2, level};
              level_found = true;
            }
          }
        }
      }
    }
    const double value = level_max * scale;
    if (level_found && (value > best || !found)) {
      best = value;
      witness = level_pair;
      found = true;
    }
  }
  HoelderReport report;
  report.alpha = alpha;
  report.theta = best;
  if (found) report.theta_pair = witness;
  report.domain = "[" + fmt(f.t_start()) + "," + fmt(f.time(f.n_t() - 1)) + "]x[0,1)^" + std::to_string(dim);
  return report;
}

double dyadic_pair_value(const Field& f, double alpha, const PairWitness& pair) {
  return std::abs(f(pair.time_a, pair.node_a) - f(pair.time_b, pair.node_b)) *
         std::pow(level_scale(pair.level), -alpha);
}

HoelderReport hoelder_report(const Field& f, double alpha, std::size_t budget) {
  HoelderReport report = seminorm_dyadic(f, alpha);
  if (f.size() <= budget) {
    const auto naive = seminorm_naive(f, alpha, budget);
    report.naive = naive.naive;
    report.naive_pair = naive.naive_pair;
  }
  return report;
}

std::vector<Field> centered_gradient(const Field& w) {
  std::vector<Field> grad(static_cast<std::size_t>(w.dim()), Field(w.dim(), w.n_x(), w.time_axis()));
  const double inv = 0.5 / w.dx();
  for (int a = 0; a < w.dim(); ++a) {
    auto& g = grad[static_cast<std::size_t>(a)];
    for (std::size_t node = 0; node < w.slab_size(); ++node) {
      const std::size_t p = w.shifted(node, a, 1), m = w.shifted(node, a, -1);
      for (std::size_t n = 0; n < w.n_t(); ++n) g(n, node) = (w(n, p) - w(n, m)) * inv;
    }
  }
  return grad;
}

double gradient_seminorm(std::span<const Field> gradient, double alpha) {
  double best = 0.0;
  for (const auto& g : gradient) best = std::max(best, *seminorm_dyadic(g, alpha).theta);
  return best;
}

double temporal_quotient(const Field& w, double alpha) {
  check_alpha(alpha);
  const std::size_t n = w.n_t();
  if (n < 2) return 0.0;
  const double gamma = 0.5 * (1.0 + alpha);
  std::vector<double> denom(n);
  for (std::size_t l = 1; l < n; ++l) denom[l] = std::pow(static_cast<double>(l) * w.dt(), gamma);

  const std::size_t slab = w.slab_size();
  double best = 0.0;
  // Lag-one pairs first so pruning starts from a good incumbent.
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (std::size_t x = 0; x < slab; ++x) best = std::max(best, std::abs(w(t + 1, x) - w(t, x)) / denom[1]);

  std::vector<double> series(n), lo, hi, next_lo, next_hi;
  for (std::size_t x = 0; x < slab; ++x) {
    for (std::size_t t = 0; t < n; ++t) series[t] = w(t, x);
    lo = series;
    hi = series;
    for (std::size_t block = 1; block < n; block *= 2) {
      // lo/hi hold min/max over aligned blocks [i*block, (i+1)*block).
      const std::size_t blocks = lo.size();
      for (std::size_t i = 0; i < blocks; ++i) {
        const std::size_t a0 = i * block;
        if (a0 + block >= n) break;
        double bmin = lo[i + 1], bmax = hi[i + 1];
        if (i + 2 < blocks) {
          bmin = std::min(bmin, lo[i + 2]);
          bmax = std::max(bmax, hi[i + 2]);
        }
        const double bound = std::max(bmax - lo[i], hi[i] - bmin) / denom[block];
        if (bound <= best) continue;
        const std::size_t a_end = std::min(a0 + block, n);
        for (std::size_t a = a0; a < a_end; ++a) {
          const std::size_t l_end = std::min(2 * block, n - a);
          for (std::size_t l = block; l < l_end; ++l)
            best = std::max(best, std::abs(series[a + l] - series[a]) / denom[l]);
        }
      }
      const std::size_t coarse = (blocks + 1) / 2;
      next_lo.assign(coarse, 0.0);
      next_hi.assign(coarse, 0.0);
      for (std::size_t i = 0; i < coarse; ++i) {
        const std::size_t j = std::min(2 * i + 1, blocks - 1);
        next_lo[i] = std::min(lo[2 * i], lo[j]);
        next_hi[i] = std::max(hi[2 * i], hi[j]);
      }
      lo.swap(next_lo);
      hi.swap(next_hi);
    }
  }
  return best;
}

double c1alpha_seminorm(const Field& w, std::span<const Field> grad_w, double alpha) {
  for (const auto& g : grad_w)
    if (!g.same_grid(w)) throw std::invalid_argument("c1alpha_seminorm: gradient grid mismatch");
  return gradient_seminorm(grad_w, alpha) + temporal_quotient(w, alpha);
}

std::string csv_header() {
  return "alpha,naive,theta,naive_t1,naive_x1,naive_t2,naive_x2,theta_t1,theta_x1,theta_t2,theta_x2,theta_R";
}

std::string to_csv_row(const Field& f, const HoelderReport& report) {
  auto coord = [&](std::size_t node) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(f.dim()));
    f.unflatten(node, idx);
    std::string s;
    for (std::size_t a = 0; a < idx.size(); ++a) s += (a ? ":" : "") + fmt(static_cast<double>(idx[a]) * f.dx());
    return s;
  };
  auto pair = [&](const std::optional<PairWitness>& p) {
    if (!p) return std::string(",,,");
    return fmt(f.time(p->time_a)) + "," + coord(p->node_a) + "," + fmt(f.time(p->time_b)) + "," + coord(p->node_b);
  };
  std::string row = fmt(report.alpha) + "," + (report.naive ? fmt(*report.naive) : "") + "," +
                    (report.theta ? fmt(*report.theta) : "") + "," + pair(report.naive_pair) + "," +
                    pair(report.theta_pair) + ",";
  if (report.theta_pair) row += fmt(std::ldexp(1.0, -report.theta_pair->level));
  return row;
}

}  // namespace qspde
