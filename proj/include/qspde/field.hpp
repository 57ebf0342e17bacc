#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace qspde {

/// Uniform time axis t_n = t_start + n * dt, n = 0 .. n_t - 1.
struct TimeAxis {
  std::size_t n_t = 1;
  double dt = 0.0;
  double t_start = 0.0;

  double time(std::size_t n) const { return t_start + static_cast<double>(n) * dt; }
  double t_end() const { return time(n_t - 1); }
  bool operator==(const TimeAxis&) const = default;
};

/// Real scalar samples on a uniform periodic grid of [0,1)^d, for one or more time slabs.
///
/// Storage is time-major, then row-major over space (last axis fastest). Vector
/// quantities such as grad v are stored as one Field per component.
class Field {
 public:
  Field() = default;
  Field(int dim, std::size_t n_x, TimeAxis time);

  int dim() const { return dim_; }
  std::size_t n_x() const { return n_x_; }
  std::size_t n_t() const { return time_.n_t; }
  const TimeAxis& time_axis() const { return time_; }
  double dt() const { return time_.dt; }
  double t_start() const { return time_.t_start; }
  double time(std::size_t n) const { return time_.time(n); }
  double dx() const { return 1.0 / static_cast<double>(n_x_); }

  /// Number of spatial nodes, n_x^d.
  std::size_t slab_size() const { return slab_size_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> slab(std::size_t n) { return {data_.data() + n * slab_size_, slab_size_}; }
  std::span<const double> slab(std::size_t n) const {
    return {data_.data() + n * slab_size_, slab_size_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator()(std::size_t n, std::size_t node) { return data_[n * slab_size_ + node]; }
  double operator()(std::size_t n, std::size_t node) const { return data_[n * slab_size_ + node]; }

  /// Flat node index of a multi-index; each component is wrapped periodically,
  /// so index n_x addresses the same node as index 0.
  std::size_t node(std::span<const std::int64_t> index) const;
  double at(std::size_t n, std::span<const std::int64_t> index) const {
    return (*this)(n, node(index));
  }

  /// Spatial multi-index of a flat node index.
  void unflatten(std::size_t node, std::span<std::int64_t> index) const;

  /// Flat index of the neighbour of `node` shifted by `offset` along `axis` (periodic).
  std::size_t shifted(std::size_t node, int axis, std::int64_t offset) const;

  bool same_grid(const Field& other) const {
    return dim_ == other.dim_ && n_x_ == other.n_x_ && time_ == other.time_;
  }
  bool same_space(const Field& other) const { return dim_ == other.dim_ && n_x_ == other.n_x_; }

  /// Index of the first NaN/Inf entry, or size() when every entry is finite.
  std::size_t first_non_finite() const;
  bool all_finite() const { return first_non_finite() == size(); }

  /// Spatial mean of slab n.
  double mean(std::size_t n) const;

  /// One-slab copy of slab n, stamped with time(n).
  Field extract_slab(std::size_t n) const;

 private:
  int dim_ = 0;
  std::size_t n_x_ = 0;
  std::size_t slab_size_ = 0;
  std::vector<std::size_t> stride_;
  TimeAxis time_;
  std::vector<double> data_;
};

/// Elementwise a + scale * b on identical grids.
Field axpy(const Field& a, double scale, const Field& b);

// QSPD binary field format, little-endian:
//   "QSPD" | u32 version | u64 d | u64 n_x[d] | u64 n_t | f64 dt | f64 t_start | f64 payload[]
// Payload is time-major, then row-major space.
inline constexpr std::uint32_t kQspdVersion = 1;

std::vector<std::uint8_t> encode_qspd(const Field& field);
Field decode_qspd(std::span<const std::uint8_t> bytes);
void write_qspd(const std::filesystem::path& path, const Field& field);
Field read_qspd(const std::filesystem::path& path);

}  // namespace qspde
