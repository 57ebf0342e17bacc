#include <cmath>
#include <complex>

#include "doctest.h"
#include "oracles.hpp"
#include "qspde/spectral_noise.hpp"

using namespace qspde;
using oracle::kPi;

TEST_CASE("mode set enumeration and pairing") {
  const ModeSet one(1, 1);
  REQUIRE(one.size() == 3);
  CHECK(one.wavevector(0, 0) == doctest::Approx(-2 * kPi));
  CHECK(one.wavevector(1, 0) == 0.0);
  CHECK(one.wavevector(2, 0) == doctest::Approx(2 * kPi));

  const ModeSet two(2, 2);
  CHECK(two.size() == 25);
  CHECK(two.norm2(two.zero_index()) == 0.0);
  for (std::size_t i = 0; i < two.size(); ++i) {
    const auto p = two.partner(i);
    for (int a = 0; a < 2; ++a) CHECK(two.integer_index(p)[a] == -two.integer_index(i)[a]);
  }
  CHECK_THROWS(ModeSet(0, 1));
  CHECK_THROWS(ModeSet(1, -1));
}

TEST_CASE("canonical covariance values") {
  const CovarianceSpec spec(1, 2.0, 4);
  const double zero[] = {0.0};
  const double k1[] = {2 * kPi};
  const double k2[] = {4 * kPi};
  CHECK(khat(spec, zero) == 1.0);
  CHECK(khat(spec, k1) == doctest::Approx(1.0 / (1.0 + 4 * kPi * kPi)));
  CHECK(khat(spec, k2) < khat(spec, k1));
  CHECK(spec.khat(spec.modes().zero_index()) == 1.0);
}

TEST_CASE("trace-class condition s > d is enforced") {
  CHECK_THROWS_AS(CovarianceSpec(1, 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(CovarianceSpec(2, 1.5, 4), std::invalid_argument);
  CHECK_NOTHROW(CovarianceSpec(2, 2.5, 4));
}

TEST_CASE("truncated tail bound dominates the directly summed tail") {
  for (double s : {1.5, 2.0, 3.0}) {
    const CovarianceSpec spec(1, s, 8);
    double tail = 0.0;
    for (int m = 9; m < 2000000; ++m) tail += 2 * std::pow(1.0 + 4 * kPi * kPi * m * m, -s / 2);
    CHECK(spec.truncated_tail_bound() >= tail);
  }
  const CovarianceSpec spec2(2, 3.0, 4);
  double tail2 = 0.0;
  for (int a = -400; a <= 400; ++a)
    for (int b = -400; b <= 400; ++b)
      if (std::max(std::abs(a), std::abs(b)) > 4) tail2 += std::pow(1.0 + 4 * kPi * kPi * (a * a + b * b), -1.5);
  CHECK(spec2.truncated_tail_bound() >= tail2);
  CHECK(recommended_kmax(1, 2.0, 1e-6) > 32);
}

TEST_CASE("custom covariance tables must respect the bound and symmetry") {
  const CovarianceSpec base(1, 2.0, 2);
  std::vector<double> table(base.khat_table().begin(), base.khat_table().end());
  for (auto& v : table) v *= 0.5;
  CHECK_NOTHROW(CovarianceSpec::with_table(1, 2.0, 2, table));
  auto too_big = table;
  too_big[0] = 1.0;
  too_big[4] = 1.0;
  CHECK_THROWS(CovarianceSpec::with_table(1, 2.0, 2, too_big));
  auto asym = table;
  asym[0] *= 0.5;
  CHECK_THROWS(CovarianceSpec::with_table(1, 2.0, 2, asym));
}

TEST_CASE("OU step limits") {
  const std::complex<double> x{0.3, -0.7};
  const std::complex<double> zeta{1.1, 0.4};
  CHECK(ou_step(x, 40.0, 0.2, 0.0, zeta) == x);
  CHECK(ou_step_variance(40.0, 0.2, 0.0) == 0.0);
  const auto decayed = ou_step(x, 40.0, 0.0, 0.01, zeta);
  CHECK(decayed.real() == doctest::Approx(std::exp(-0.4) * x.real()));
  CHECK(decayed.imag() == doctest::Approx(std::exp(-0.4) * x.imag()));
  // int_0^dt e^{-2 tau k^2} dtau
  CHECK(ou_step_variance(40.0, 0.2, 1e6) == doctest::Approx(0.2 / 80.0));
  CHECK(ou_step_variance(0.0, 0.2, 0.5) == doctest::Approx(0.1));
  CHECK_THROWS(ou_step(x, 40.0, 0.2, -1.0, zeta));
}

TEST_CASE("stationary OU variance from an ensemble") {
  const double k2 = 4 * kPi * kPi, kh = 0.3;
  const double target = kh / (2 * k2);
  GaussianStream rng(5);
  const int n = 20000;
  double m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::norm(ou_step({0.0, 0.0}, k2, kh, 50.0, rng));
    m2 += v;
    m4 += v * v;
  }
  const double mean = m2 / n;
  const double se = std::sqrt((m4 / n - mean * mean) / n);
  CHECK(std::abs(mean - target) < 4 * se);
}

TEST_CASE("sampled coefficient variance matches the Ito isometry") {
  const CovarianceSpec spec(1, 2.0, 3);
  const TimeAxis axis{5, 0.25, 0.0};
  const std::size_t mode = spec.modes().zero_index() + 1;  // m = 1
  const double k2 = spec.modes().norm2(mode);
  const int n = 10000;
  std::vector<double> s1(axis.n_t, 0.0), s2(axis.n_t, 0.0);
  for (int r = 0; r < n; ++r) {
    const auto path = sample_noise_path(spec, axis, derive_seed(77, r));
    for (std::size_t t = 0; t < axis.n_t; ++t) {
      const double v = std::norm(path.at(t)[mode]);
      s1[t] += v;
      s2[t] += v * v;
    }
  }
  CHECK(s1[0] == 0.0);
  for (std::size_t t = 1; t < axis.n_t; ++t) {
    const double time = axis.time(t);
    const double expected = spec.khat(mode) * (1 - std::exp(-2 * time * k2)) / (2 * k2);
    CHECK(mode_variance(k2, spec.khat(mode), time) == doctest::Approx(expected));
    const double mean = s1[t] / n;
    const double se = std::sqrt((s2[t] / n - mean * mean) / n);
    CHECK(std::abs(mean - expected) < 4 * se);
  }
}

TEST_CASE("noise paths are deterministic, paired and zero before t = 0") {
  const CovarianceSpec spec(2, 3.0, 3);
  const TimeAxis axis{4, 0.125, -0.125};
  const auto a = sample_noise_path(spec, axis, 9);
  const auto b = sample_noise_path(spec, axis, 9);
  CHECK(a.coefficients == b.coefficients);
  const auto c = sample_noise_path(spec, axis, 10);
  CHECK(a.coefficients != c.coefficients);
  for (const auto& z : a.at(0)) CHECK(z == std::complex<double>{});
  for (const auto& z : a.at(1)) CHECK(z == std::complex<double>{});
  const auto& modes = spec.modes();
  for (std::size_t i = 0; i < modes.size(); ++i) CHECK(a.at(3)[modes.partner(i)] == std::conj(a.at(3)[i]));
  CHECK(a.at(3)[modes.zero_index()].imag() == 0.0);
}

TEST_CASE("sampling after t = 1 is pure decay") {
  const CovarianceSpec spec(1, 2.0, 2);
  NoiseSampler s(spec, 3);
  s.advance_to(1.0);
  const std::vector<std::complex<double>> at1(s.coefficients().begin(), s.coefficients().end());
  s.advance_to(1.5);
  for (std::size_t i = 0; i < at1.size(); ++i) {
    const double f = std::exp(-0.5 * spec.modes().norm2(i));
    CHECK(std::abs(s.coefficients()[i] - f * at1[i]) < 1e-15);
  }
  CHECK_THROWS(s.advance_to(1.2));
}

TEST_CASE("synthesis matches a direct sum and a single pair") {
  const CovarianceSpec spec(1, 2.0, 3);
  const auto path = sample_noise_path(spec, TimeAxis{2, 0.5, 0.0}, 21);
  const std::size_t n_x = 16;
  const Field v = evaluate_field(path, n_x, Component::value());
  const Field g = evaluate_field(path, n_x, Component::gradient(0));
  const auto& modes = spec.modes();
  for (std::size_t x = 0; x < n_x; ++x) {
    const double pos = static_cast<double>(x) / n_x;
    std::complex<double> sv{}, sg{};
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const double k = modes.wavevector(i, 0);
      const auto e = std::polar(1.0, k * pos);
      sv += path.at(1)[i] * e;
      sg += std::complex<double>(0.0, k) * path.at(1)[i] * e;
    }
    CHECK(v(1, x) == doctest::Approx(sv.real()).epsilon(1e-12));
    CHECK(g(1, x) == doctest::Approx(sg.real()).epsilon(1e-12));
    CHECK(std::abs(sv.imag()) < 1e-12);
  }

  // One pair {k, -k} with X_k = c.
  NoisePath single = path;
  std::fill(single.coefficients.begin(), single.coefficients.end(), std::complex<double>{});
  const std::complex<double> c{0.4, -0.9};
  const std::size_t i1 = modes.zero_index() + 1;
  single.coefficients[i1] = c;
  single.coefficients[modes.partner(i1)] = std::conj(c);
  single.coefficients[modes.size() + modes.zero_index()] = 2.5;  // k = 0 at t_1
  const Field vs = evaluate_field(single, n_x, Component::value());
  const Field gs = evaluate_field(single, n_x, Component::gradient(0));
  for (std::size_t x = 0; x < n_x; ++x) {
    const double pos = static_cast<double>(x) / n_x;
    CHECK(vs(0, x) == doctest::Approx(2 * (c * std::polar(1.0, 2 * kPi * pos)).real()));
    CHECK(gs(1, x) == doctest::Approx(0.0));
    CHECK(vs(1, x) == doctest::Approx(2.5));
  }
  CHECK_THROWS(evaluate_field(path, 7, Component::value()));
}

TEST_CASE("closed-form covariance") {
  const CovarianceSpec spec(1, 2.0, 32);
  const double r0[] = {0.0};
  const double r1[] = {0.125};
  const double rm[] = {-0.125};
  CHECK(covariance_closed_form(spec, 0, 0.7, 0.0, r1) == 0.0);
  CHECK(covariance_closed_form(spec, 0, 0.5, 0.25, r1) == covariance_closed_form(spec, 0, 0.5, 0.25, rm));

  // Truncated sum at t = t' = 1, r = 0: sum_k Khat/2 (1 - e^{-2k^2}).
  double direct = 0.0;
  for (int m = -32; m <= 32; ++m) {
    if (m == 0) continue;
    const double k2 = 4 * kPi * kPi * m * m;
    direct += std::pow(1 + k2, -1.0) * 0.5 * (1 - std::exp(-2 * k2));
  }
  CHECK(covariance_closed_form(spec, 0, 1.0, 1.0, r0) == doctest::Approx(direct).epsilon(1e-13));

  for (auto [t, tp, r] : {std::tuple{1.0, 0.5, 0.125}, std::tuple{0.5, 0.25, 0.0}, std::tuple{0.25, 0.25, 0.125}}) {
    const double off[] = {r};
    CHECK(covariance_closed_form(spec, 0, t, tp, off) ==
          doctest::Approx(oracle::gradient_covariance_1d(2.0, 32, t, tp, r)).epsilon(1e-8));
  }
  CHECK_THROWS(covariance_closed_form(spec, 0, 1.5, 0.5, r0));
}
