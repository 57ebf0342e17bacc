// qspde: batch front end for noise sampling, solves, norms and Monte Carlo checks.
//
// Exit status: 0 success, 1 validation error, 2 runtime failure, 3 gate FAIL.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qspde/config.hpp"
#include "qspde/field.hpp"
#include "qspde/hoelder.hpp"
#include "qspde/mc_harness.hpp"
#include "qspde/nonlinearity.hpp"
#include "qspde/solver.hpp"
#include "qspde/spectral_noise.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qspde;

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kGateFail = 3 };

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t workers = 1;
  bool deterministic = false;
  // subcommand specific
  std::string input;
  bool noise_only = false;
  std::int64_t samples = 100000;
  double radius = 5.0;
};

struct Run {
  ExperimentConfig cfg;
  std::string hash;
  fs::path out;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("cannot read config file " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run load(const Options& opt) {
  Run run;
  run.cfg = parse_config(read_text(opt.config_path));
  if (opt.seed) run.cfg.seed = *opt.seed;
  if (opt.out) run.cfg.out = *opt.out;
  run.hash = config_hash(run.cfg);
  run.out = run.cfg.out;
  fs::create_directories(run.out);
  return run;
}

json header(const Run& run, const std::string& command) {
  return {{"command", command},
          {"config_hash", run.hash},
          {"seed", run.cfg.seed},
          {"config", serialize_config(run.cfg)}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  o << text;
  if (!o) throw RuntimeFailure("cannot write " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void write_field(const Run& run, const fs::path& p, const Field& f, const std::string& name) {
  write_qspd(p, f);
  write_json(p.string() + ".meta.json", {{"field", name},
                                         {"config_hash", run.hash},
                                         {"seed", run.cfg.seed},
                                         {"dim", f.dim()},
                                         {"n_x", f.n_x()},
                                         {"n_t", f.n_t()},
                                         {"dt", f.dt()},
                                         {"t_start", f.t_start()}});
}

TimeAxis output_axis(const ExperimentConfig& cfg) {
  const auto s = solver_config(cfg);
  return {s.steps() / s.output_stride + 1, s.dt * static_cast<double>(s.output_stride), 0.0};
}

std::string gradient_name(int a) { return "grad_v_" + std::to_string(a); }

JSource j_source(const ExperimentConfig& cfg) {
  switch (cfg.j) {
    case JMode::grad_v_negated:
      return JSource::grad_v_negated();
    case JMode::zero:
      return JSource::zero();
    case JMode::file: {
      std::vector<Field> comps;
      for (const auto& f : cfg.j_file) comps.push_back(read_qspd(f));
      return JSource::from_field(std::move(comps));
    }
  }
  return {};
}

int cmd_sample_noise(const Options& opt) {
  const Run run = load(opt);
  const auto spec = covariance_spec(run.cfg);
  const NoisePath path = sample_noise_path(spec, output_axis(run.cfg), run.cfg.seed);
  write_field(run, run.out / "v.qspd", evaluate_field(path, run.cfg.n_x, Component::value()), "v");
  for (int a = 0; a < run.cfg.dim; ++a)
    write_field(run, run.out / (gradient_name(a) + ".qspd"),
                evaluate_field(path, run.cfg.n_x, Component::gradient(a)), gradient_name(a));
  json report = header(run, "sample-noise");
  report["tail_bound"] = spec.truncated_tail_bound();
  report["retained_mass"] = spec.retained_mass();
  write_json(run.out / "sample-noise.json", report);
  return kOk;
}

int cmd_solve(const Options& opt) {
  const Run run = load(opt);
  const auto spec = covariance_spec(run.cfg);
  const Trajectory traj = solve(solver_config(run.cfg), spec, run.cfg.seed, j_source(run.cfg));
  write_field(run, run.out / "w.qspd", traj.w, "w");
  write_field(run, run.out / "v.qspd", traj.v, "v");
  write_field(run, run.out / "u.qspd", traj.u(), "u");
  for (int a = 0; a < run.cfg.dim; ++a)
    write_field(run, run.out / (gradient_name(a) + ".qspd"), traj.grad_v[static_cast<std::size_t>(a)],
                gradient_name(a));
  json report = header(run, "solve");
  const auto& d = traj.diagnostics;
  report["diagnostics"] = {{"steps", d.steps},
                           {"mean_initial", d.mean_initial},
                           {"max_mean_drift", d.max_mean_drift},
                           {"drift_per_unit_time", d.drift_per_unit_time},
                           {"wall_seconds", d.wall_seconds}};
  write_json(run.out / "solve.json", report);
  return kOk;
}

int cmd_norms(const Options& opt) {
  const Run run = load(opt);
  const fs::path in = opt.input.empty() ? run.out : fs::path(opt.input);
  const Field w = read_qspd(in / "w.qspd");
  std::vector<Field> grad_v;
  for (int a = 0; a < w.dim(); ++a) grad_v.push_back(read_qspd(in / (gradient_name(a) + ".qspd")));
  const auto grad_w = centered_gradient(w);
  std::vector<Field> grad_u;
  for (int a = 0; a < w.dim(); ++a)
    grad_u.push_back(axpy(grad_w[static_cast<std::size_t>(a)], 1.0, grad_v[static_cast<std::size_t>(a)]));

  std::string csv = "field," + csv_header() + "\n";
  json rows = json::array();
  for (double alpha : run.cfg.alpha) {
    rows.push_back({{"alpha", alpha},
                    {"grad_v", gradient_seminorm(grad_v, alpha)},
                    {"grad_u", gradient_seminorm(grad_u, alpha)},
                    {"remainder", c1alpha_seminorm(w, grad_w, alpha)}});
    auto emit = [&](const std::string& name, const Field& f) {
      csv += name + "," + to_csv_row(f, hoelder_report(f, alpha)) + "\n";
    };
    for (int a = 0; a < w.dim(); ++a) {
      emit(gradient_name(a), grad_v[static_cast<std::size_t>(a)]);
      emit("grad_u_" + std::to_string(a), grad_u[static_cast<std::size_t>(a)]);
      emit("grad_w_" + std::to_string(a), grad_w[static_cast<std::size_t>(a)]);
    }
  }
  json report = header(run, "norms");
  report["input"] = in.string();
  report["norms"] = rows;
  write_json(run.out / "norms.json", report);
  write_text(run.out / "norms.csv", "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n" + csv);
  return kOk;
}

json to_json(const Moments& m) {
  return {{"count", m.count}, {"mean", m.mean}, {"stddev", m.stddev}, {"min", m.min}, {"max", m.max}};
}

json to_json(const std::optional<TailFit>& t) {
  if (!t) return nullptr;
  return {{"p", t->p}, {"c", t->c}, {"points", t->points}, {"r_squared", t->r_squared}};
}

int cmd_mc(const Options& opt) {
  const Run run = load(opt);
  CampaignConfig c;
  c.spec = covariance_spec(run.cfg);
  c.n_x = run.cfg.n_x;
  c.dt = run.cfg.dt * static_cast<double>(run.cfg.output_stride);
  c.t_end = run.cfg.t_end;
  if (!opt.noise_only) c.solver = solver_config(run.cfg);
  c.j = j_source(run.cfg);
  c.realizations = run.cfg.realizations;
  c.root_seed = run.cfg.seed;
  c.workers = opt.deterministic ? 1 : opt.workers;

  json report = header(run, "mc");
  report["workers"] = c.workers;
  report["solve"] = !opt.noise_only;
  json campaigns = json::array();
  std::string csv = "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n" +
                    "alpha,index,seed,grad_v,grad_u,remainder,wall_seconds,failed\n";
  bool pass = true;
  for (double alpha : run.cfg.alpha) {
    c.alpha = alpha;
    const McStats stats = run_campaign(c);
    json gates = {{"failure_fraction", !stats.failed}};
    pass = pass && !stats.failed;
    json entry = {{"alpha", alpha},
                  {"n", stats.n},
                  {"failures", stats.failures},
                  {"grad_v", to_json(stats.grad_v)},
                  {"grad_u", stats.grad_u ? to_json(*stats.grad_u) : json(nullptr)},
                  {"remainder", stats.remainder ? to_json(*stats.remainder) : json(nullptr)},
                  {"tail_fits",
                   {{"grad_v", to_json(stats.grad_v_tail)},
                    {"grad_u", to_json(stats.grad_u_tail)},
                    {"remainder", to_json(stats.remainder_tail)}}},
                  {"gates", gates},
                  {"pass", !stats.failed}};
    json errors = json::array();
    for (const auto& r : stats.records) {
      csv += format_real(alpha) + "," + std::to_string(r.index) + "," + std::to_string(r.seed) + "," +
             (r.failed ? "" : format_real(r.grad_v)) + "," + (r.grad_u ? format_real(*r.grad_u) : "") + "," +
             (r.remainder ? format_real(*r.remainder) : "") + "," + format_real(r.wall_seconds) + "," +
             (r.failed ? "1" : "0") + "\n";
      if (r.failed) errors.push_back({{"index", r.index}, {"seed", r.seed}, {"error", r.error}});
    }
    entry["failed_realizations"] = errors;
    campaigns.push_back(entry);
  }
  report["campaigns"] = campaigns;
  report["pass"] = pass;
  write_json(run.out / "mc.json", report);
  write_text(run.out / "mc.csv", csv);
  return pass ? kOk : kGateFail;
}

int cmd_verify_covariance(const Options& opt) {
  const Run run = load(opt);
  const auto spec = covariance_spec(run.cfg);
  std::vector<CovariancePoint> points;
  const double times[] = {0.25, 0.5, 1.0};
  for (double t : times)
    for (double tp : times)
      if (tp <= t)
        for (double r : {0.0, 0.125}) points.push_back({t, r, tp, 0.0});
  const auto rep = covariance_check(spec, points, run.cfg.realizations, run.cfg.seed);
  json rows = json::array();
  std::string csv = "# config_hash=" + run.hash + " seed=" + std::to_string(run.cfg.seed) + "\n" +
                    "t,x,t_prime,x_prime,estimate,standard_error,oracle,ratio\n";
  for (const auto& r : rep.residuals) {
    rows.push_back({{"t", r.point.t},
                    {"x", r.point.x},
                    {"t_prime", r.point.t_prime},
                    {"x_prime", r.point.x_prime},
                    {"estimate", r.estimate},
                    {"standard_error", r.standard_error},
                    {"oracle", r.oracle},
                    {"ratio", r.ratio}});
    csv += format_real(r.point.t) + "," + format_real(r.point.x) + "," + format_real(r.point.t_prime) + "," +
           format_real(r.point.x_prime) + "," + format_real(r.estimate) + "," + format_real(r.standard_error) + "," +
           format_real(r.oracle) + "," + format_real(r.ratio) + "\n";
  }
  json report = header(run, "verify-covariance");
  report["n"] = rep.n;
  report["gate"] = kCovarianceGate;
  report["max_ratio"] = rep.max_ratio;
  report["residuals"] = rows;
  report["pass"] = rep.pass;
  write_json(run.out / "verify-covariance.json", report);
  write_text(run.out / "verify-covariance.csv", csv);
  return rep.pass ? kOk : kGateFail;
}

int cmd_verify_ellipticity(const Options& opt) {
  const Run run = load(opt);
  const Nonlinearity nl = builtin(run.cfg.nonlinearity, run.cfg.lambda);
  const auto rep = verify_ellipticity(nl, run.cfg.dim, opt.samples, opt.radius, run.cfg.seed);
  json violations = json::array();
  for (const auto& v : rep.violations)
    violations.push_back({{"condition", v.condition},
                          {"q", v.q},
                          {"q_prime", v.q_prime},
                          {"xi", v.xi},
                          {"value", v.value},
                          {"bound", v.bound}});
  json report = header(run, "verify-ellipticity");
  report["nonlinearity"] = rep.nonlinearity;
  report["dim"] = rep.dim;
  report["samples"] = rep.samples;
  report["radius"] = opt.radius;
  report["declared_lambda"] = rep.declared_lambda;
  report["declared_lipschitz"] = rep.declared_lipschitz;
  report["min_rayleigh"] = rep.min_rayleigh;
  report["max_norm_ratio"] = rep.max_norm_ratio;
  report["max_lipschitz_ratio"] = rep.max_lipschitz_ratio;
  report["violation_count"] = rep.violation_count;
  report["violations"] = violations;
  report["pass"] = rep.pass;
  write_json(run.out / "verify-ellipticity.json", report);
  return rep.pass ? kOk : kGateFail;
}

void print_error(const std::string& kind, const std::string& message, const json& violations = nullptr) {
  json e = {{"error", {{"kind", kind}, {"message", message}}}};
  if (!violations.is_null()) e["error"]["violations"] = violations;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic quasilinear parabolic equation toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { opt.seed = s; }, "Root seed override");
    sub->add_option_function<std::string>("--out", [&](const std::string& s) { opt.out = s; }, "Output directory override");
    sub->add_option("--workers", opt.workers, "Worker threads for campaigns")->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", opt.deterministic, "Force a single worker");
  };

  struct Entry {
    CLI::App* app;
    int (*fn)(const Options&);
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    entries.push_back({sub, fn});
    return sub;
  };
  add("sample-noise", "Sample v and grad v on the output grid", cmd_sample_noise);
  add("solve", "Solve for w = u - v and write the trajectory", cmd_solve);
  add("norms", "Hoelder norms of a stored trajectory", cmd_norms)
      ->add_option("--input", opt.input, "Directory holding w.qspd and grad_v_*.qspd (default: output directory)");
  add("mc", "Monte Carlo norm campaign", cmd_mc)->add_flag("--noise-only", opt.noise_only, "Skip the solver");
  add("verify-covariance", "Covariance oracle check of grad v", cmd_verify_covariance);
  auto* ell = add("verify-ellipticity", "Sampled ellipticity and Lipschitz check", cmd_verify_ellipticity);
  ell->add_option("--samples", opt.samples, "Number of samples")->check(CLI::PositiveNumber);
  ell->add_option("--radius", opt.radius, "Sampling radius")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("validation", e.what());
    return kValidation;
  }

  try {
    for (const auto& e : entries)
      if (e.app->parsed()) return e.fn(opt);
  } catch (const ConfigError& e) {
    json v = json::array();
    for (const auto& x : e.violations()) v.push_back({{"key", x.key}, {"message", x.message}});
    print_error("validation", e.what(), v);
    return kValidation;
  } catch (const std::invalid_argument& e) {
    print_error("validation", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return kRuntime;
  }
  return kOk;
}
