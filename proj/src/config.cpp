#include "qspde/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace qspde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_real(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

template <class Int>
bool parse_int(const std::string& s, Int& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool is_power_of_two(double x) {
  if (!(x > 0.0)) return false;
  int e = 0;
  return std::frexp(x, &e) == 0.5;
}

const std::vector<std::string>& schema_keys() {
  static const std::vector<std::string> keys{"d",      "s",      "kmax",   "n_x",  "dt",   "T",
                                             "cfl_safety", "output_stride", "alpha", "nonlinearity",
                                             "lambda", "j",      "j_file", "seed", "N",    "out", "norms"};
  return keys;
}

}  // namespace

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* to_string(JMode mode) {
  switch (mode) {
    case JMode::grad_v_negated:
      return "grad_v_negated";
    case JMode::file:
      return "file";
    case JMode::zero:
      return "zero";
  }
  return "?";
}

const char* to_string(NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::identity:
      return "identity";
    case NonlinearityKind::tanh_perturbed:
      return "tanh_perturbed";
    case NonlinearityKind::custom:
      return "custom";
  }
  return "?";
}

ConfigError::ConfigError(std::vector<ConfigViolation> violations)
    : std::invalid_argument([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  " + v.key + ": " + v.message;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<ConfigViolation> bad;
  std::set<std::string> seen;
  const std::set<std::string> known(schema_keys().begin(), schema_keys().end());

  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bad.push_back({"line " + std::to_string(line_no), "expected 'key = value'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known.count(key)) {
      bad.push_back({key, "unknown key"});
      continue;
    }
    if (!seen.insert(key).second) {
      bad.push_back({key, "duplicate key"});
      continue;
    }
    auto real = [&](double& out) {
      if (!parse_real(value, out)) bad.push_back({key, "not a finite real: '" + value + "'"});
    };
    auto count = [&](auto& out) {
      if (!parse_int(value, out)) bad.push_back({key, "not a non-negative integer: '" + value + "'"});
    };
    if (key == "d") {
      if (!parse_int(value, cfg.dim)) bad.push_back({key, "not an integer: '" + value + "'"});
    } else if (key == "s") {
      real(cfg.decay);
    } else if (key == "kmax") {
      if (!parse_int(value, cfg.kmax)) bad.push_back({key, "not an integer: '" + value + "'"});
    } else if (key == "n_x") {
      count(cfg.n_x);
    } else if (key == "dt") {
      real(cfg.dt);
    } else if (key == "T") {
      real(cfg.t_end);
    } else if (key == "cfl_safety") {
      real(cfg.cfl_safety);
    } else if (key == "output_stride") {
      count(cfg.output_stride);
    } else if (key == "alpha") {
      cfg.alpha.clear();
      for (const auto& item : split_list(value)) {
        double a = 0.0;
        if (parse_real(item, a))
          cfg.alpha.push_back(a);
        else
          bad.push_back({key, "not a finite real: '" + item + "'"});
      }
    } else if (key == "nonlinearity") {
      if (value == "identity")
        cfg.nonlinearity = NonlinearityKind::identity;
      else if (value == "tanh_perturbed")
        cfg.nonlinearity = NonlinearityKind::tanh_perturbed;
      else
        bad.push_back({key, "expected identity | tanh_perturbed, got '" + value + "'"});
    } else if (key == "lambda") {
      real(cfg.lambda);
    } else if (key == "j") {
      if (value == "grad_v_negated")
        cfg.j = JMode::grad_v_negated;
      else if (value == "file")
        cfg.j = JMode::file;
      else if (value == "zero")
        cfg.j = JMode::zero;
      else
        bad.push_back({key, "expected grad_v_negated | file | zero, got '" + value + "'"});
    } else if (key == "j_file") {
      cfg.j_file = split_list(value);
    } else if (key == "seed") {
      count(cfg.seed);
    } else if (key == "N") {
      count(cfg.realizations);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "norms") {
      if (value == "true")
        cfg.norms = true;
      else if (value == "false")
        cfg.norms = false;
      else
        bad.push_back({key, "expected true | false, got '" + value + "'"});
    }
  }
  for (const char* required : {"d", "s"})
    if (!seen.count(required)) bad.push_back({required, "required key missing"});

  // Invariants are only meaningful once every value parsed.
  if (bad.empty()) bad = validate_config(cfg);
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return cfg;
}

std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg) {
  std::vector<ConfigViolation> bad;
  const double d = static_cast<double>(cfg.dim);
  if (cfg.dim < 1) bad.push_back({"d", "dimension must be at least 1"});
  if (!(cfg.decay > d))
    bad.push_back({"s", "trace-class condition s > d violated (s = " + format_real(cfg.decay) +
                            ", d = " + std::to_string(cfg.dim) + ")"});
  if (cfg.kmax < 0) bad.push_back({"kmax", "must be >= 0"});
  if (cfg.kmax >= 0 && cfg.n_x < 2 * static_cast<std::size_t>(cfg.kmax) + 2)
    bad.push_back({"n_x", "must be at least 2 kmax + 2 = " + std::to_string(2 * cfg.kmax + 2) +
                              " to resolve every retained mode"});
  if (!(cfg.dt > 0.0)) bad.push_back({"dt", "must be positive"});
  if (!(cfg.t_end > 0.0)) bad.push_back({"T", "must be positive"});
  if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) bad.push_back({"cfl_safety", "must lie in (0,1]"});
  if (cfg.output_stride < 1) bad.push_back({"output_stride", "must be >= 1"});
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0))
    bad.push_back({"lambda", "ellipticity contrast must lie in (0,1]"});
  if (cfg.realizations < 1) bad.push_back({"N", "at least one realization is required"});
  if (cfg.j == JMode::file && cfg.j_file.size() != static_cast<std::size_t>(std::max(cfg.dim, 0)))
    bad.push_back({"j_file", "j = file needs one QSPD file per component (" + std::to_string(cfg.dim) + ")"});
  if (cfg.alpha.empty()) bad.push_back({"alpha", "at least one exponent is required"});

  if (cfg.dim >= 1 && cfg.n_x >= 2 && cfg.dt > 0.0 && cfg.t_end > 0.0 && cfg.output_stride >= 1 &&
      cfg.cfl_safety > 0.0) {
    SolverConfig s;
    s.n_x = cfg.n_x;
    s.dt = cfg.dt;
    s.t_end = cfg.t_end;
    s.cfl_safety = cfg.cfl_safety;
    s.output_stride = cfg.output_stride;
    try {
      validate(s, cfg.dim);
    } catch (const std::invalid_argument& e) {
      bad.push_back({"dt", e.what()});
    }
  }

  const double bound = std::min((cfg.decay - d) / 2.0, 1.0);
  for (double a : cfg.alpha) {
    if (!(a > 0.0 && a < 1.0)) {
      bad.push_back({"alpha", "exponent " + format_real(a) + " must lie in (0,1)"});
    } else if (cfg.norms && !(a < bound)) {
      bad.push_back({"alpha", "exponent " + format_real(a) + " must be below min{(s-d)/2, 1} = " +
                                  format_real(bound) + " for norm campaigns"});
    }
  }
  if (cfg.norms) {
    if (!is_power_of_two(static_cast<double>(cfg.n_x)))
      bad.push_back({"n_x", "dyadic norms need a power of two"});
    const double dt_out = cfg.dt * static_cast<double>(cfg.output_stride);
    if (!is_power_of_two(dt_out) || dt_out > 0.25)
      bad.push_back({"dt", "dyadic norms need dt * output_stride a power of two <= 1/4"});
  }
  return bad;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  o << "d = " << cfg.dim << "\n";
  o << "s = " << format_real(cfg.decay) << "\n";
  o << "kmax = " << cfg.kmax << "\n";
  o << "n_x = " << cfg.n_x << "\n";
  o << "dt = " << format_real(cfg.dt) << "\n";
  o << "T = " << format_real(cfg.t_end) << "\n";
  o << "cfl_safety = " << format_real(cfg.cfl_safety) << "\n";
  o << "output_stride = " << cfg.output_stride << "\n";
  o << "alpha = ";
  for (std::size_t i = 0; i < cfg.alpha.size(); ++i) o << (i ? ", " : "") << format_real(cfg.alpha[i]);
  o << "\n";
  o << "nonlinearity = " << to_string(cfg.nonlinearity) << "\n";
  o << "lambda = " << format_real(cfg.lambda) << "\n";
  o << "j = " << to_string(cfg.j) << "\n";
  if (!cfg.j_file.empty()) {
    o << "j_file = ";
    for (std::size_t i = 0; i < cfg.j_file.size(); ++i) o << (i ? ", " : "") << cfg.j_file[i];
    o << "\n";
  }
  o << "seed = " << cfg.seed << "\n";
  o << "N = " << cfg.realizations << "\n";
  o << "out = " << cfg.out << "\n";
  o << "norms = " << (cfg.norms ? "true" : "false") << "\n";
  return o.str();
}

std::string normalize_config(const std::string& text) { return serialize_config(parse_config(text)); }

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

CovarianceSpec covariance_spec(const ExperimentConfig& cfg) { return {cfg.dim, cfg.decay, cfg.kmax}; }

SolverConfig solver_config(const ExperimentConfig& cfg) {
  SolverConfig s;
  s.n_x = cfg.n_x;
  s.dt = cfg.dt;
  s.t_end = cfg.t_end;
  s.cfl_safety = cfg.cfl_safety;
  s.output_stride = cfg.output_stride;
  s.nonlinearity = builtin(cfg.nonlinearity, cfg.lambda);
  return s;
}

}  // namespace qspde
