#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stvo {

using Shape = std::vector<int>;

// Contiguous row-major float64 array with up to 4 axes. Rasters are laid out
// (channel, height, width); correlation volumes use (H, W, H_l, W_l).
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(Shape shape, double fill = 0.0);
  DenseArray(Shape shape, std::vector<double> values);

  static DenseArray zeros_like(const DenseArray& other) {
    return DenseArray(other.shape_);
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-specific indexing; no bounds checks on the hot path.
  double& operator()(int y, int x) { return data_[index(y, x)]; }
  double operator()(int y, int x) const { return data_[index(y, x)]; }
  double& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  double operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& operator()(int a, int b, int c, int d) { return data_[index(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const {
    return data_[index(a, b, c, d)];
  }

  void fill(double v);
  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  double sum() const noexcept;

  // Same data, new shape with equal element count.
  DenseArray reshaped(Shape shape) const;

  bool same_shape(const DenseArray& other) const noexcept {
    return shape_ == other.shape_;
  }

 private:
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * shape_[1] + x;
  }
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x;
  }
  std::size_t index(int a, int b, int c, int d) const noexcept {
    return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) *
               shape_[3] +
           d;
  }

  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

// Throws ShapeMismatch with `context` in the message.
void require_shape(const DenseArray& a, const Shape& expected,
                   const char* context);
void require_same_shape(const DenseArray& a, const DenseArray& b,
                        const char* context);

// NaN-check mode: when enabled, every op output is scanned and a NonFinite
// error is raised on the first NaN/Inf. Process-wide, off by default.
void set_nan_check(bool enabled) noexcept;
bool nan_check_enabled() noexcept;
void check_finite(const DenseArray& a, const char* context);

}  // namespace stvo
