#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qspde/config.hpp"
#include "qspde/field.hpp"
#include "qspde/hoelder.hpp"
#include "qspde/mc_harness.hpp"
#include "qspde/nonlinearity.hpp"
#include "qspde/solver.hpp"
#include "qspde/spectral_noise.hpp"

namespace py = pybind11;
using namespace qspde;

namespace {

// Fields cross the boundary as arrays of shape (n_t, n_x, ..., n_x).
py::array_t<double> to_array(const Field& f) {
  std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(f.n_t())};
  for (int a = 0; a < f.dim(); ++a) shape.push_back(static_cast<py::ssize_t>(f.n_x()));
  py::array_t<double> out(shape);
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

Field from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a, double dt, double t_start) {
  if (a.ndim() < 2) throw std::invalid_argument("field arrays need shape (n_t, n_x, ...)");
  const auto n_x = static_cast<std::size_t>(a.shape(1));
  for (py::ssize_t k = 2; k < a.ndim(); ++k)
    if (static_cast<std::size_t>(a.shape(k)) != n_x) throw std::invalid_argument("field arrays must be isotropic");
  Field f(static_cast<int>(a.ndim() - 1), n_x, TimeAxis{static_cast<std::size_t>(a.shape(0)), dt, t_start});
  std::copy(a.data(), a.data() + a.size(), f.data().begin());
  return f;
}

}  // namespace

PYBIND11_MODULE(_qspde, m) {
  m.doc() = "Spectral noise, flux-form solver and Hoelder norm estimators";

  py::class_<CovarianceSpec>(m, "CovarianceSpec")
      .def(py::init<int, double, int>(), py::arg("dim"), py::arg("decay"), py::arg("kmax"))
      .def_property_readonly("dim", &CovarianceSpec::dim)
      .def_property_readonly("decay", &CovarianceSpec::decay)
      .def_property_readonly("kmax", &CovarianceSpec::kmax)
      .def_property_readonly("tail_bound", &CovarianceSpec::truncated_tail_bound)
      .def_property_readonly("retained_mass", &CovarianceSpec::retained_mass);

  m.def("recommended_kmax", &recommended_kmax, py::arg("dim"), py::arg("decay"), py::arg("relative_tolerance") = 1e-6);

  m.def(
      "sample_noise",
      [](const CovarianceSpec& spec, std::size_t n_x, std::size_t n_t, double dt, std::uint64_t seed, int gradient_axis) {
        const auto path = sample_noise_path(spec, TimeAxis{n_t, dt, 0.0}, seed);
        return to_array(evaluate_field(path, n_x, Component{gradient_axis}));
      },
      py::arg("spec"), py::arg("n_x"), py::arg("n_t"), py::arg("dt"), py::arg("seed"), py::arg("gradient_axis") = -1,
      "v (gradient_axis = -1) or d_axis v at t = n dt, n < n_t.");

  m.def(
      "covariance_closed_form",
      [](const CovarianceSpec& spec, int axis, double t, double t_prime, std::vector<double> offset) {
        return covariance_closed_form(spec, axis, t, t_prime, offset);
      },
      py::arg("spec"), py::arg("axis"), py::arg("t"), py::arg("t_prime"), py::arg("offset"));

  m.def(
      "covariance_check",
      [](const CovarianceSpec& spec, const std::vector<std::tuple<double, double, double, double>>& pts, std::size_t n,
         std::uint64_t seed) {
        std::vector<CovariancePoint> points;
        for (auto [t, x, tp, xp] : pts) points.push_back({t, x, tp, xp});
        const auto rep = covariance_check(spec, points, n, seed);
        py::list rows;
        for (const auto& r : rep.residuals)
          rows.append(py::dict(py::arg("estimate") = r.estimate, py::arg("standard_error") = r.standard_error,
                               py::arg("oracle") = r.oracle, py::arg("ratio") = r.ratio));
        return py::dict(py::arg("pass") = rep.pass, py::arg("max_ratio") = rep.max_ratio, py::arg("residuals") = rows);
      },
      py::arg("spec"), py::arg("points"), py::arg("n"), py::arg("seed"));

  m.def(
      "solve",
      [](const CovarianceSpec& spec, std::size_t n_x, double dt, double t_end, const std::string& nonlinearity,
         double lambda, const std::string& j, std::uint64_t seed, std::size_t output_stride) {
        SolverConfig cfg;
        cfg.n_x = n_x;
        cfg.dt = dt;
        cfg.t_end = t_end;
        cfg.output_stride = output_stride;
        cfg.nonlinearity = builtin(nonlinearity, lambda);
        JSource src;
        if (j == "zero")
          src = JSource::zero();
        else if (j != "grad_v_negated")
          throw std::invalid_argument("j must be grad_v_negated or zero");
        const auto traj = solve(cfg, spec, seed, src);
        py::list grad;
        for (const auto& g : traj.grad_v) grad.append(to_array(g));
        return py::dict(py::arg("w") = to_array(traj.w), py::arg("v") = to_array(traj.v), py::arg("grad_v") = grad,
                        py::arg("max_mean_drift") = traj.diagnostics.max_mean_drift);
      },
      py::arg("spec"), py::arg("n_x"), py::arg("dt"), py::arg("t_end"), py::arg("nonlinearity") = "identity",
      py::arg("lambda_") = 1.0, py::arg("j") = "grad_v_negated", py::arg("seed") = 0, py::arg("output_stride") = 1);

  m.def(
      "seminorm_naive",
      [](py::array_t<double> a, double dt, double alpha) { return *seminorm_naive(from_array(a, dt, 0.0), alpha).naive; },
      py::arg("field"), py::arg("dt"), py::arg("alpha"));
  m.def(
      "seminorm_dyadic",
      [](py::array_t<double> a, double dt, double alpha) { return *seminorm_dyadic(from_array(a, dt, 0.0), alpha).theta; },
      py::arg("field"), py::arg("dt"), py::arg("alpha"));
  m.def(
      "c1alpha_seminorm",
      [](py::array_t<double> a, double dt, double alpha) {
        const Field w = from_array(a, dt, 0.0);
        return c1alpha_seminorm(w, centered_gradient(w), alpha);
      },
      py::arg("w"), py::arg("dt"), py::arg("alpha"));
  m.def("chaining_constant", [] { return kChainingConstant; });

  m.def(
      "tail_fit",
      [](std::vector<double> samples) {
        const auto t = tail_fit(std::move(samples));
        return py::make_tuple(t.p, t.c);
      },
      py::arg("samples"));

  m.def(
      "verify_ellipticity",
      [](const std::string& kind, double lambda, int dim, std::int64_t n, double radius, std::uint64_t seed) {
        const auto rep = verify_ellipticity(builtin(kind, lambda), dim, n, radius, seed);
        return py::dict(py::arg("pass") = rep.pass, py::arg("min_rayleigh") = rep.min_rayleigh,
                        py::arg("max_norm_ratio") = rep.max_norm_ratio,
                        py::arg("max_lipschitz_ratio") = rep.max_lipschitz_ratio,
                        py::arg("violation_count") = rep.violation_count);
      },
      py::arg("kind"), py::arg("lambda_"), py::arg("dim"), py::arg("n"), py::arg("radius") = 5.0, py::arg("seed") = 0);

  m.def("normalize_config", &normalize_config, py::arg("text"));
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));
}
