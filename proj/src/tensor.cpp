#include "stvo/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "stvo/error.hpp"

namespace stvo {

namespace {
std::atomic<bool> g_nan_check{false};
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(ErrorCode::kShapeMismatch, "negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

DenseArray::DenseArray(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
  if (shape_.size() > 4) {
    throw Error(ErrorCode::kShapeMismatch, "DenseArray supports at most 4 axes");
  }
}

DenseArray::DenseArray(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_.size() > 4) {
    throw Error(ErrorCode::kShapeMismatch, "DenseArray supports at most 4 axes");
  }
  if (data_.size() != element_count(shape_)) {
    throw Error(ErrorCode::kShapeMismatch,
                "value count does not match shape " + shape_string(shape_));
  }
}

void DenseArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double DenseArray::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double DenseArray::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

DenseArray DenseArray::reshaped(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot reshape " +
                                               shape_string(shape_) + " to " +
                                               shape_string(shape));
  }
  return DenseArray(std::move(shape), data_);
}

void require_shape(const DenseArray& a, const Shape& expected,
                   const char* context) {
  if (a.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(context) + ": expected " + shape_string(expected) +
                    ", got " + shape_string(a.shape()));
  }
}

void require_same_shape(const DenseArray& a, const DenseArray& b,
                        const char* context) {
  require_shape(b, a.shape(), context);
}

void set_nan_check(bool enabled) noexcept { g_nan_check = enabled; }
bool nan_check_enabled() noexcept { return g_nan_check; }

void check_finite(const DenseArray& a, const char* context) {
  if (g_nan_check && !a.all_finite()) {
    throw Error(ErrorCode::kNonFinite, context);
  }
}

}  // namespace stvo
