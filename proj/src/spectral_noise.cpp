#include "qspde/spectral_noise.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qspde {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t checked_power(std::size_t base, int exponent) {
  std::size_t out = 1;
  for (int i = 0; i < exponent; ++i) {
    if (out > std::numeric_limits<std::size_t>::max() / base)
      throw std::invalid_argument("mode set too large");
    out *= base;
  }
  return out;
}

// Integral comparison: the shell |m|_inf = n holds at most 2d(2n+1)^{d-1} <= 2d 3^{d-1} n^{d-1}
// lattice points, each with Khat <= (2 pi n)^{-s}.
double tail_bound(int dim, double decay, std::int64_t kmax) {
  const double shell = 2.0 * dim * std::pow(3.0, dim - 1) * std::pow(kTwoPi, -decay);
  const double excess = decay - dim;
  if (kmax <= 0) return shell * (1.0 + 1.0 / excess);
  return shell * std::pow(static_cast<double>(kmax), -excess) / excess;
}

}  // namespace

ModeSet::ModeSet(int dim, int kmax) : dim_(dim), kmax_(kmax) {
  if (dim < 1) throw std::invalid_argument("make_mode_set: dimension must be >= 1");
  if (kmax < 0) throw std::invalid_argument("make_mode_set: kmax must be >= 0");
  const auto side = static_cast<std::size_t>(2 * kmax + 1);
  count_ = checked_power(side, dim);
  index_.resize(count_ * static_cast<std::size_t>(dim));
  norm2_.resize(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    std::size_t rest = i;
    double k2 = 0.0;
    for (int a = dim - 1; a >= 0; --a) {
      const auto m = static_cast<std::int32_t>(rest % side) - kmax;
      rest /= side;
      index_[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)] = m;
      const double k = kTwoPi * m;
      k2 += k * k;
    }
    norm2_[i] = k2;
  }
}

double ModeSet::wavevector(std::size_t i, int axis) const {
  return kTwoPi * index_[i * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(axis)];
}

ModeSet make_mode_set(int dim, int kmax) { return ModeSet(dim, kmax); }

CovarianceSpec::CovarianceSpec(int dim, double decay, int kmax)
    : decay_(decay), modes_(std::make_shared<const ModeSet>(dim, kmax)) {
  if (!(decay > dim))
    throw std::invalid_argument("CovarianceSpec: decay s = " + std::to_string(decay) +
                                " must exceed the dimension d = " + std::to_string(dim) +
                                " (trace-class condition)");
  khat_.resize(modes_->size());
  for (std::size_t i = 0; i < khat_.size(); ++i)
    khat_[i] = std::pow(1.0 + modes_->norm2(i), -0.5 * decay);
  for (double v : khat_) retained_mass_ += v;
  tail_bound_ = tail_bound(dim, decay, kmax);
}

CovarianceSpec CovarianceSpec::with_table(int dim, double decay, int kmax, std::vector<double> table) {
  CovarianceSpec spec(dim, decay, kmax);
  if (table.size() != spec.khat_.size())
    throw std::invalid_argument("CovarianceSpec: table size does not match the mode set");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table[i] >= 0.0) || table[i] > spec.khat_[i] * (1.0 + 1e-12))
      throw std::invalid_argument("CovarianceSpec: table entry " + std::to_string(i) +
                                  " violates 0 <= Khat(k) <= (1+|k|^2)^{-s/2}");
    if (table[i] != table[spec.modes_->partner(i)])
      throw std::invalid_argument("CovarianceSpec: table is not symmetric under k -> -k");
  }
  spec.khat_ = std::move(table);
  spec.retained_mass_ = 0.0;
  for (double v : spec.khat_) spec.retained_mass_ += v;
  return spec;
}

double khat(const CovarianceSpec& spec, std::span<const double> k) {
  double k2 = 0.0;
  for (double c : k) k2 += c * c;
  return std::pow(1.0 + k2, -0.5 * spec.decay());
}

int recommended_kmax(int dim, double decay, double relative_tolerance) {
  if (!(decay > dim)) throw std::invalid_argument("recommended_kmax: requires s > d");
  // The k = 0 term alone contributes 1 to the total mass.
  for (std::int64_t kmax = 0; kmax < std::numeric_limits<int>::max(); kmax = std::max<std::int64_t>(1, 2 * kmax)) {
    if (tail_bound(dim, decay, kmax) <= relative_tolerance) {
      std::int64_t lo = kmax / 2, hi = kmax;
      while (lo + 1 < hi) {
        const auto mid = (lo + hi) / 2;
        (tail_bound(dim, decay, mid) <= relative_tolerance ? hi : lo) = mid;
      }
      return static_cast<int>(kmax == 0 ? 0 : hi);
    }
  }
  return std::numeric_limits<int>::max();
}

double ou_step_variance(double k_norm2, double khat_k, double dt) {
  if (k_norm2 == 0.0) return khat_k * dt;
  return khat_k * (-std::expm1(-2.0 * dt * k_norm2)) / (2.0 * k_norm2);
}

double mode_variance(double k_norm2, double khat_k, double t) {
  return ou_step_variance(k_norm2, khat_k, std::clamp(t, 0.0, 1.0)) *
         (t > 1.0 ? std::exp(-2.0 * (t - 1.0) * k_norm2) : 1.0);
}

std::complex<double> ou_step(std::complex<double> x, double k_norm2, double khat_k, double dt,
                             std::complex<double> zeta) {
  if (dt < 0.0) throw std::invalid_argument("ou_step: dt must be >= 0");
  const double sigma = std::sqrt(ou_step_variance(k_norm2, khat_k, dt));
  return std::exp(-dt * k_norm2) * x + sigma * zeta;
}

std::complex<double> ou_step(std::complex<double> x, double k_norm2, double khat_k, double dt,
                             GaussianStream& rng) {
  if (dt < 0.0) throw std::invalid_argument("ou_step: dt must be >= 0");
  return ou_step(x, k_norm2, khat_k, dt, rng.standard_complex());
}

NoiseSampler::NoiseSampler(const CovarianceSpec& spec, std::uint64_t seed)
    : spec_(spec),
      anchor_(spec.modes().size()),
      current_(spec.modes().size()),
      time_(-std::numeric_limits<double>::infinity()) {
  const auto& modes = spec_.modes();
  streams_.reserve(modes.zero_index() + 1);
  for (std::size_t i = 0; i <= modes.zero_index(); ++i) streams_.emplace_back(derive_seed(seed, i));
}

void NoiseSampler::advance_to(double t) {
  if (t < time_ && !(t <= 0.0 && time_ <= 0.0))
    throw std::invalid_argument("NoiseSampler: time must be non-decreasing");
  const auto& modes = spec_.modes();
  const double from = std::clamp(time_, 0.0, 1.0);
  const double to = std::clamp(t, 0.0, 1.0);
  if (to > from) {
    const double dt = to - from;
    const auto zero = modes.zero_index();
    for (std::size_t i = 0; i < zero; ++i)
      anchor_[i] = ou_step(anchor_[i], modes.norm2(i), spec_.khat(i), dt, streams_[i]);
    // beta_0 = conj(beta_0) is real, with E beta_0(t)^2 = t.
    anchor_[zero] += std::sqrt(spec_.khat(zero) * dt) * streams_[zero].standard_normal();
  }
  time_ = std::max(time_, t);
  const double decay_time = t > 1.0 ? t - 1.0 : 0.0;
  for (std::size_t i = 0; i <= modes.zero_index(); ++i) {
    const auto x = decay_time > 0.0 ? std::exp(-decay_time * modes.norm2(i)) * anchor_[i] : anchor_[i];
    current_[i] = x;
    current_[modes.partner(i)] = std::conj(x);
  }
  current_[modes.zero_index()] = {current_[modes.zero_index()].real(), 0.0};
}

NoisePath sample_noise_path(const CovarianceSpec& spec, const TimeAxis& time, std::uint64_t seed) {
  if (time.n_t < 1) throw std::invalid_argument("sample_noise_path: empty time grid");
  if (time.n_t > 1 && !(time.dt > 0.0))
    throw std::invalid_argument("sample_noise_path: time step must be positive");
  NoisePath path{spec, time, seed, {}};
  const auto m = spec.modes().size();
  path.coefficients.resize(m * time.n_t);
  NoiseSampler sampler(spec, seed);
  for (std::size_t n = 0; n < time.n_t; ++n) {
    sampler.advance_to(time.time(n));
    const auto c = sampler.coefficients();
    std::copy(c.begin(), c.end(), path.coefficients.begin() + static_cast<std::ptrdiff_t>(n * m));
  }
  return path;
}

struct SpectralSynthesizer::Plan {
  fftw_complex* buffer = nullptr;
  fftw_plan plan = nullptr;
};

SpectralSynthesizer::SpectralSynthesizer(const ModeSet& modes, std::size_t n_x)
    : modes_(&modes), n_x_(n_x), plan_(std::make_unique<Plan>()) {
  if (n_x < static_cast<std::size_t>(2 * modes.kmax() + 2))
    throw std::invalid_argument("n_x = " + std::to_string(n_x) + " aliases retained modes; need n_x >= " +
                                std::to_string(2 * modes.kmax() + 2));
  const int dim = modes.dim();
  total_ = checked_power(n_x, dim);
  placement_.resize(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    std::size_t slot = 0;
    for (int a = 0; a < dim; ++a) {
      const auto m = static_cast<std::int64_t>(modes.integer_index(i)[static_cast<std::size_t>(a)]);
      const auto n = static_cast<std::int64_t>(n_x);
      slot = slot * n_x + static_cast<std::size_t>(((m % n) + n) % n);
    }
    placement_[i] = slot;
  }
  std::vector<int> shape(static_cast<std::size_t>(dim), static_cast<int>(n_x));
  std::lock_guard lock(fftw_planner_mutex());
  plan_->buffer = fftw_alloc_complex(total_);
  plan_->plan = fftw_plan_dft(dim, shape.data(), plan_->buffer, plan_->buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (plan_->plan == nullptr) throw std::runtime_error("FFTW planning failed");
}

SpectralSynthesizer::~SpectralSynthesizer() {
  std::lock_guard lock(fftw_planner_mutex());
  if (plan_->plan != nullptr) fftw_destroy_plan(plan_->plan);
  if (plan_->buffer != nullptr) fftw_free(plan_->buffer);
}

double SpectralSynthesizer::synthesize(std::span<const std::complex<double>> coefficients,
                                       Component component, std::span<double> out) {
  if (coefficients.size() != modes_->size() || out.size() != total_)
    throw std::invalid_argument("SpectralSynthesizer: size mismatch");
  auto* buf = plan_->buffer;
  std::fill(reinterpret_cast<double*>(buf), reinterpret_cast<double*>(buf) + 2 * total_, 0.0);
  for (std::size_t i = 0; i < coefficients.size(); ++i) {
    std::complex<double> c = coefficients[i];
    if (!component.is_value()) c *= std::complex<double>(0.0, modes_->wavevector(i, component.gradient_axis));
    buf[placement_[i]][0] = c.real();
    buf[placement_[i]][1] = c.imag();
  }
  fftw_execute(plan_->plan);
  double residue = 0.0;
  for (std::size_t p = 0; p < total_; ++p) {
    out[p] = buf[p][0];
    residue = std::max(residue, std::abs(buf[p][1]));
  }
  return residue;
}

Field evaluate_field(const NoisePath& path, std::size_t n_x, Component component) {
  const auto& modes = path.spec.modes();
  if (!component.is_value() && component.gradient_axis >= modes.dim())
    throw std::invalid_argument("evaluate_field: gradient axis out of range");
  SpectralSynthesizer synth(modes, n_x);
  Field field(modes.dim(), n_x, path.time);
  for (std::size_t n = 0; n < path.time.n_t; ++n) {
    const double residue = synth.synthesize(path.at(n), component, field.slab(n));
    if (residue > kMaxImaginaryResidue)
      throw std::runtime_error("evaluate_field: imaginary residue " + std::to_string(residue) +
                               " exceeds tolerance; coefficients are not reality-paired");
  }
  return field;
}

double covariance_closed_form(const CovarianceSpec& spec, int axis, double t, double t_prime,
                              std::span<const double> offset) {
  if (t < 0.0 || t > 1.0 || t_prime < 0.0 || t_prime > 1.0)
    throw std::invalid_argument("covariance_closed_form: times must lie in [0,1]");
  const auto& modes = spec.modes();
  if (axis < 0 || axis >= modes.dim()) throw std::invalid_argument("covariance_closed_form: bad axis");
  if (offset.size() != static_cast<std::size_t>(modes.dim()))
    throw std::invalid_argument("covariance_closed_form: offset dimension mismatch");
  if (t_prime > t) std::swap(t, t_prime);
  double sum = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const double k2 = modes.norm2(i);
    if (k2 == 0.0) continue;
    const double kj = modes.wavevector(i, axis);
    double phase = 0.0;
    for (int a = 0; a < modes.dim(); ++a) phase += modes.wavevector(i, a) * offset[static_cast<std::size_t>(a)];
    const double bracket = std::exp(-(t - t_prime) * k2) - std::exp(-(t + t_prime) * k2);
    sum += spec.khat(i) * (kj * kj / (2.0 * k2)) * std::cos(phase) * bracket;
  }
  return sum;
}

}  // namespace qspde
