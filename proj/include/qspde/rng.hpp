#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace qspde {

/// SplitMix64 finalizer. Used only to derive independent sub-stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of child stream `index` of `parent`.
///
/// Campaigns use derive_seed(root, realization) for the realization seed and
/// derive_seed(realization_seed, mode_index) for each Fourier mode, so every
/// (root, realization, mode) triple owns a disjoint stream.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) ^ splitmix64(index + 0xD1B54A32D192ED03ULL));
}

/// Deterministic Gaussian source over std::mt19937_64.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double standard_normal() { return normal_(engine_); }

  /// Complex Gaussian with E|z|^2 = 1 (independent real/imaginary parts, variance 1/2 each).
  std::complex<double> standard_complex() {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {kInvSqrt2 * re, kInvSqrt2 * im};
  }

  double uniform() { return uniform_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace qspde
