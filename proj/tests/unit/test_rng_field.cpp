#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "qspde/field.hpp"
#include "qspde/rng.hpp"

using namespace qspde;

TEST_CASE("derived seeds are distinct and deterministic") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t parent = 0; parent < 20; ++parent)
    for (std::uint64_t i = 0; i < 500; ++i) seen.insert(derive_seed(parent, i));
  CHECK(seen.size() == 20 * 500);
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(3, 7));
}

TEST_CASE("complex Gaussian has unit second moment with independent halves") {
  GaussianStream rng(42);
  const int n = 200000;
  double m2 = 0.0, re2 = 0.0, cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto z = rng.standard_complex();
    m2 += std::norm(z);
    re2 += z.real() * z.real();
    cross += z.real() * z.imag();
  }
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(re2 / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(cross / n) < 0.01);
}

TEST_CASE("field indexing wraps periodically") {
  Field f(2, 4, TimeAxis{3, 0.5, 1.0});
  CHECK(f.slab_size() == 16);
  CHECK(f.size() == 48);
  CHECK(f.time(2) == 2.0);
  const std::int64_t a[] = {1, 2};
  const std::int64_t b[] = {5, -2};
  CHECK(f.node(a) == 1 * 4 + 2);
  CHECK(f.node(b) == f.node(a));
  std::int64_t back[2];
  f.unflatten(f.node(a), back);
  CHECK(back[0] == 1);
  CHECK(back[1] == 2);
  CHECK(f.shifted(f.node(a), 1, 3) == 1 * 4 + 1);
  CHECK(f.shifted(f.node(a), 0, -2) == 3 * 4 + 2);
}

TEST_CASE("mean, finiteness and slab extraction") {
  Field f(1, 4, TimeAxis{2, 0.25, 0.0});
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = static_cast<double>(i);
  CHECK(f.mean(0) == 1.5);
  CHECK(f.mean(1) == 5.5);
  CHECK(f.all_finite());
  const Field s = f.extract_slab(1);
  CHECK(s.n_t() == 1);
  CHECK(s.t_start() == 0.25);
  CHECK(s(0, 3) == 7.0);
  f(1, 2) = std::nan("");
  CHECK(f.first_non_finite() == 6);
  const Field g = axpy(s, 2.0, s);
  CHECK(g(0, 1) == 15.0);
}

TEST_CASE("QSPD round trip is exact and the header layout is fixed") {
  Field f(2, 3, TimeAxis{2, 0.125, 0.5});
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = std::sin(static_cast<double>(i)) * 1e-7 + i;
  const auto bytes = encode_qspd(f);
  // magic + version + d + n_x[2] + n_t + dt + t_start + payload
  CHECK(bytes.size() == 4 + 4 + 8 + 16 + 8 + 8 + 8 + 8 * f.size());
  CHECK(bytes[0] == 'Q');
  CHECK(bytes[3] == 'D');
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  const Field g = decode_qspd(bytes);
  CHECK(g.same_grid(f));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(g.data()[i] == f.data()[i]);

  const auto path = std::filesystem::temp_directory_path() / "qspde_roundtrip.qspd";
  write_qspd(path, f);
  const Field h = read_qspd(path);
  CHECK(h.same_grid(f));
  CHECK(h(1, 5) == f(1, 5));
  std::filesystem::remove(path);
}

TEST_CASE("QSPD decoding rejects malformed input") {
  Field f(1, 4, TimeAxis{1, 0.0, 0.0});
  auto bytes = encode_qspd(f);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS(decode_qspd(bad_magic));
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS(decode_qspd(bad_version));
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS(decode_qspd(truncated));
}
