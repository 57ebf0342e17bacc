#include "qspde/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qspde {

Field::Field(int dim, std::size_t n_x, TimeAxis time) : dim_(dim), n_x_(n_x), time_(time) {
  if (dim < 1) throw std::invalid_argument("Field: dimension must be >= 1");
  if (n_x < 1) throw std::invalid_argument("Field: n_x must be >= 1");
  if (time.n_t < 1) throw std::invalid_argument("Field: n_t must be >= 1");
  stride_.assign(static_cast<std::size_t>(dim), 1);
  slab_size_ = 1;
  for (int a = dim - 1; a >= 0; --a) {
    stride_[static_cast<std::size_t>(a)] = slab_size_;
    slab_size_ *= n_x;
  }
  data_.assign(slab_size_ * time.n_t, 0.0);
}

std::size_t Field::node(std::span<const std::int64_t> index) const {
  const auto n = static_cast<std::int64_t>(n_x_);
  std::size_t flat = 0;
  for (int a = 0; a < dim_; ++a) {
    std::int64_t i = index[static_cast<std::size_t>(a)] % n;
    if (i < 0) i += n;
    flat += static_cast<std::size_t>(i) * stride_[static_cast<std::size_t>(a)];
  }
  return flat;
}

void Field::unflatten(std::size_t node, std::span<std::int64_t> index) const {
  for (int a = 0; a < dim_; ++a) {
    const auto s = stride_[static_cast<std::size_t>(a)];
    index[static_cast<std::size_t>(a)] = static_cast<std::int64_t>((node / s) % n_x_);
  }
}

std::size_t Field::shifted(std::size_t node, int axis, std::int64_t offset) const {
  const auto s = stride_[static_cast<std::size_t>(axis)];
  const auto n = static_cast<std::int64_t>(n_x_);
  const auto i = static_cast<std::int64_t>((node / s) % n_x_);
  std::int64_t j = (i + offset) % n;
  if (j < 0) j += n;
  return node + static_cast<std::size_t>(j) * s - static_cast<std::size_t>(i) * s;
}

std::size_t Field::first_non_finite() const {
  const auto it = std::find_if(data_.begin(), data_.end(), [](double x) { return !std::isfinite(x); });
  return static_cast<std::size_t>(std::distance(data_.begin(), it));
}

double Field::mean(std::size_t n) const {
  const auto s = slab(n);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(slab_size_);
}

Field Field::extract_slab(std::size_t n) const {
  Field out(dim_, n_x_, TimeAxis{1, time_.dt, time(n)});
  const auto src = slab(n);
  std::copy(src.begin(), src.end(), out.data_.begin());
  return out;
}

Field axpy(const Field& a, double scale, const Field& b) {
  if (!a.same_grid(b)) throw std::invalid_argument("axpy: grid mismatch");
  Field out = a;
  auto o = out.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += scale * bv[i];
  return out;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
      throw std::runtime_error("QSPD: truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_qspd(const Field& field) {
  std::vector<std::uint8_t> out;
  out.reserve(48 + 8 * field.size());
  for (char c : std::string("QSPD")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kQspdVersion);
  put_u64(out, static_cast<std::uint64_t>(field.dim()));
  for (int a = 0; a < field.dim(); ++a) put_u64(out, field.n_x());
  put_u64(out, field.n_t());
  put_f64(out, field.dt());
  put_f64(out, field.t_start());
  for (double v : field.data()) put_f64(out, v);
  return out;
}

Field decode_qspd(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 'Q' || bytes[1] != 'S' || bytes[2] != 'P' || bytes[3] != 'D')
    throw std::runtime_error("QSPD: bad magic");
  Reader r(bytes.subspan(4));
  const auto version = static_cast<std::uint32_t>(r.u(4));
  if (version != kQspdVersion)
    throw std::runtime_error("QSPD: unsupported version " + std::to_string(version));
  const auto dim = r.u(8);
  if (dim < 1 || dim > 16) throw std::runtime_error("QSPD: bad dimension");
  const auto n_x = r.u(8);
  for (std::uint64_t a = 1; a < dim; ++a) {
    if (r.u(8) != n_x) throw std::runtime_error("QSPD: anisotropic grids are not supported");
  }
  const auto n_t = r.u(8);
  const double dt = r.f64();
  const double t_start = r.f64();
  Field field(static_cast<int>(dim), n_x, TimeAxis{n_t, dt, t_start});
  if (r.remaining() != 8 * field.size()) throw std::runtime_error("QSPD: payload size mismatch");
  for (double& v : field.data()) v = r.f64();
  return field;
}

void write_qspd(const std::filesystem::path& path, const Field& field) {
  const auto bytes = encode_qspd(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Field read_qspd(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_qspd(bytes);
}

}  // namespace qspde
