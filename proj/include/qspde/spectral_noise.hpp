#pragma once

// Exact-in-law spectral sampling of the linear stochastic heat solution
//
//   v(t,x) = sum_k sqrt(Khat(k)) e^{ik.x} int_0^{min(t,1)} e^{-(t-s)|k|^2} dbeta_k(s)
//
// on the periodic torus [0,1)^d, truncated to wave vectors k = 2 pi m with
// |m_i| <= kmax. The complex Brownian motions satisfy E|beta_k(t)|^2 = t and
// beta_{-k} = conj(beta_k).

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "qspde/field.hpp"
#include "qspde/rng.hpp"

namespace qspde {

/// Wave vectors k = 2 pi m, m in {-kmax..kmax}^d, in lexicographic order of m.
///
/// In this order negation maps index i to size() - 1 - i and k = 0 sits in the
/// middle, so the pairing map is implicit.
class ModeSet {
 public:
  ModeSet(int dim, int kmax);

  int dim() const { return dim_; }
  int kmax() const { return kmax_; }
  std::size_t size() const { return count_; }
  std::size_t zero_index() const { return count_ / 2; }
  std::size_t partner(std::size_t i) const { return count_ - 1 - i; }
  /// One mode of each {k, -k} pair, plus k = 0.
  bool is_representative(std::size_t i) const { return i <= partner(i); }

  std::span<const std::int32_t> integer_index(std::size_t i) const {
    return {index_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double wavevector(std::size_t i, int axis) const;
  double norm2(std::size_t i) const { return norm2_[i]; }

 private:
  int dim_;
  int kmax_;
  std::size_t count_;
  std::vector<std::int32_t> index_;
  std::vector<double> norm2_;
};

ModeSet make_mode_set(int dim, int kmax);

/// Spectral covariance Khat(k) of the spatially translation-invariant noise.
///
/// The canonical choice saturates the trace-class bound, Khat(k) = (1+|k|^2)^{-s/2}
/// with s > d; custom tables must respect that bound and the k <-> -k symmetry.
class CovarianceSpec {
 public:
  CovarianceSpec(int dim, double decay, int kmax);
  static CovarianceSpec with_table(int dim, double decay, int kmax, std::vector<double> table);

  int dim() const { return modes_->dim(); }
  double decay() const { return decay_; }
  int kmax() const { return modes_->kmax(); }
  const ModeSet& modes() const { return *modes_; }
  double khat(std::size_t mode) const { return khat_[mode]; }
  std::span<const double> khat_table() const { return khat_; }

  /// Integral-comparison upper bound on the neglected mass sum_{|m|_inf > kmax} Khat(k).
  double truncated_tail_bound() const { return tail_bound_; }
  /// Retained mass sum over the mode set.
  double retained_mass() const { return retained_mass_; }

 private:
  double decay_;
  std::shared_ptr<const ModeSet> modes_;
  std::vector<double> khat_;
  double tail_bound_ = 0.0;
  double retained_mass_ = 0.0;
};

/// (1 + |k|^2)^{-s/2}.
double khat(const CovarianceSpec& spec, std::span<const double> k);

/// Smallest kmax whose truncated tail bound is below `relative_tolerance` times the total mass.
int recommended_kmax(int dim, double decay, double relative_tolerance = 1e-6);

/// Variance E|X_k(t+dt) - e^{-dt|k|^2} X_k(t)|^2 of one exact OU step.
double ou_step_variance(double k_norm2, double khat_k, double dt);

/// Exact-in-law update of the stochastic convolution over one step of length dt,
/// valid while t + dt <= 1. `zeta` is a complex Gaussian with E|zeta|^2 = 1.
std::complex<double> ou_step(std::complex<double> x, double k_norm2, double khat_k, double dt,
                             std::complex<double> zeta);
std::complex<double> ou_step(std::complex<double> x, double k_norm2, double khat_k, double dt,
                             GaussianStream& rng);

/// Streaming sampler of the mode coefficients X_k(t). Every representative mode
/// owns a GaussianStream seeded with derive_seed(seed, mode index).
class NoiseSampler {
 public:
  NoiseSampler(const CovarianceSpec& spec, std::uint64_t seed);

  /// Moves to time t >= time(). Exact in law for any step sizes; after t = 1 the
  /// coefficients only decay.
  void advance_to(double t);
  double time() const { return time_; }
  /// Coefficients of all modes at time(), partners conjugated.
  std::span<const std::complex<double>> coefficients() const { return current_; }
  const CovarianceSpec& spec() const { return spec_; }

 private:
  CovarianceSpec spec_;
  std::vector<GaussianStream> streams_;
  std::vector<std::complex<double>> anchor_;  // state at min(time_, 1)
  std::vector<std::complex<double>> current_;
  double time_ = 0.0;
};

/// Mode coefficients of v on a uniform time grid; row n holds X_k(t_n) for every mode.
struct NoisePath {
  CovarianceSpec spec;
  TimeAxis time;
  std::uint64_t seed = 0;
  std::vector<std::complex<double>> coefficients;

  std::span<const std::complex<double>> at(std::size_t n) const {
    const auto m = spec.modes().size();
    return {coefficients.data() + n * m, m};
  }
};

NoisePath sample_noise_path(const CovarianceSpec& spec, const TimeAxis& time, std::uint64_t seed);

/// Which field a set of coefficients is synthesised into.
struct Component {
  int gradient_axis = -1;  // -1: the value v itself
  static Component value() { return {}; }
  static Component gradient(int axis) { return {axis}; }
  bool is_value() const { return gradient_axis < 0; }
};

/// Inverse DFT of mode coefficients onto the n_x^d grid of [0,1)^d.
///
/// Reuses one FFTW plan; a synthesiser is not shareable between threads but
/// distinct synthesisers are.
class SpectralSynthesizer {
 public:
  SpectralSynthesizer(const ModeSet& modes, std::size_t n_x);
  ~SpectralSynthesizer();
  SpectralSynthesizer(const SpectralSynthesizer&) = delete;
  SpectralSynthesizer& operator=(const SpectralSynthesizer&) = delete;

  /// Writes sum_k c_k X_k e^{ik.x} into `out` with c_k = 1 or i k_j. Returns the
  /// largest discarded imaginary part.
  double synthesize(std::span<const std::complex<double>> coefficients, Component component,
                    std::span<double> out);

  std::size_t n_x() const { return n_x_; }

 private:
  const ModeSet* modes_;
  std::size_t n_x_;
  std::size_t total_;
  std::vector<std::size_t> placement_;  // grid slot of each mode
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

/// Largest imaginary residue tolerated when discarding the imaginary part.
inline constexpr double kMaxImaginaryResidue = 1e-10;

/// v or d_j v on an n_x^d grid at every time of the path. Requires n_x >= 2 kmax + 2.
Field evaluate_field(const NoisePath& path, std::size_t n_x, Component component);

/// Closed-form E[h(t,x) h(t',x')] for h = d_j v and r = x - x', summed over the
/// retained modes. The k = 0 term is zero.
double covariance_closed_form(const CovarianceSpec& spec, int axis, double t, double t_prime,
                              std::span<const double> offset);

/// E|X_k(t)|^2 for a mode, t in [0, infinity).
double mode_variance(double k_norm2, double khat_k, double t);

}  // namespace qspde
