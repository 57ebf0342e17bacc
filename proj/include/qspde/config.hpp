#pragma once

// Experiment configuration: a `key = value` text format, one key per line, '#'
// starting a comment. Lists are comma separated.
//
//   d, s              dimension and covariance decay (required)
//   kmax              Fourier truncation, modes |m_i| <= kmax              [16]
//   n_x               grid points per axis                                 [64]
//   dt, T             time step and horizon                                [2^-14, 1]
//   cfl_safety        theta in dt <= theta dx^2 / (2d)                     [1]
//   output_stride     record every this many steps                         [1]
//   alpha             Hoelder exponents                                    [0.2]
//   nonlinearity      identity | tanh_perturbed                            [identity]
//   lambda            ellipticity contrast                                 [1]
//   j                 grad_v_negated | file | zero                         [grad_v_negated]
//   j_file            QSPD file(s) of the j components (j = file)
//   seed, N           root seed and number of realizations                 [0, 1]
//   out               output directory                                     [.]
//   norms             whether Hoelder norm campaigns are requested         [true]

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qspde/nonlinearity.hpp"
#include "qspde/solver.hpp"
#include "qspde/spectral_noise.hpp"

namespace qspde {

enum class JMode { grad_v_negated, file, zero };

struct ExperimentConfig {
  int dim = 1;
  double decay = 2.0;
  int kmax = 16;
  std::size_t n_x = 64;
  double dt = 1.0 / 16384.0;
  double t_end = 1.0;
  double cfl_safety = 1.0;
  std::size_t output_stride = 1;
  std::vector<double> alpha{0.2};
  NonlinearityKind nonlinearity = NonlinearityKind::identity;
  double lambda = 1.0;
  JMode j = JMode::grad_v_negated;
  std::vector<std::string> j_file;
  std::uint64_t seed = 0;
  std::size_t realizations = 1;
  std::string out = ".";
  bool norms = true;
};

struct ConfigViolation {
  std::string key;
  std::string message;
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigViolation> violations);
  const std::vector<ConfigViolation>& violations() const { return violations_; }

 private:
  std::vector<ConfigViolation> violations_;
};

/// Parses and validates; throws ConfigError listing every violation found.
ExperimentConfig parse_config(const std::string& text);

/// Every invariant violation of an already-typed config.
std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg);

/// Canonical text: every key in schema order, reals with 17 significant digits.
std::string serialize_config(const ExperimentConfig& cfg);

/// serialize_config(parse_config(text)).
std::string normalize_config(const std::string& text);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// 17 significant digits.
std::string format_real(double x);

const char* to_string(JMode mode);
const char* to_string(NonlinearityKind kind);

CovarianceSpec covariance_spec(const ExperimentConfig& cfg);
SolverConfig solver_config(const ExperimentConfig& cfg);

}  // namespace qspde
