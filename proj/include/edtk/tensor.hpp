#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "edtk/errors.hpp"

namespace edtk {

/// Dimensions of a dense tensor, rank 1 to 4, every dimension at least 1.
///
/// Feature maps are rank 3 (channels, height, width). Convolution kernels are
/// rank 4 (out, in-per-group, kh, kw).
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() : dims_{1, 1, 1, 1}, rank_(1) {}
  Shape(std::initializer_list<std::size_t> dims) { assign(dims.begin(), dims.size()); }
  explicit Shape(std::span<const std::size_t> dims) { assign(dims.data(), dims.size()); }

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  std::span<const std::size_t> dims() const { return {dims_.data(), rank_}; }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }

  std::string to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
    return os.str();
  }

  friend bool operator==(const Shape& a, const Shape& b) {
    if (a.rank_ != b.rank_) return false;
    for (std::size_t i = 0; i < a.rank_; ++i)
      if (a.dims_[i] != b.dims_[i]) return false;
    return true;
  }

 private:
  void assign(const std::size_t* d, std::size_t n) {
    if (n == 0 || n > kMaxRank) throw ShapeError("tensor rank must be 1..4, got " + std::to_string(n));
    dims_.fill(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] == 0) throw ShapeError("tensor dimensions must be >= 1");
      dims_[i] = d[i];
    }
    rank_ = n;
  }

  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

/// Dense tensor in channel-major, row-major order.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{}) {}
  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.numel(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_.to_string());
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t size() const { return data_.size(); }

  // Rank-3 accessors.
  std::size_t channels() const { return shape_[0]; }
  std::size_t height() const { return shape_[1]; }
  std::size_t width() const { return shape_[2]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t c, std::size_t h, std::size_t w) { return data_[(c * shape_[1] + h) * shape_[2] + w]; }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const { return data_[(c * shape_[1] + h) * shape_[2] + w]; }
  T& at(std::size_t o, std::size_t i, std::size_t kh, std::size_t kw) {
    return data_[((o * shape_[1] + i) * shape_[2] + kh) * shape_[3] + kw];
  }
  const T& at(std::size_t o, std::size_t i, std::size_t kh, std::size_t kw) const {
    return data_[((o * shape_[1] + i) * shape_[2] + kh) * shape_[3] + kw];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  /// Contiguous plane of channel c (rank 3).
  std::span<const T> channel(std::size_t c) const {
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<const T>(data_).subspan(c * plane, plane);
  }
  std::span<T> channel(std::size_t c) {
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<T>(data_).subspan(c * plane, plane);
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape.numel() != size()) throw ShapeError("reshape changes element count");
    return BasicTensor(shape, data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

inline void require_rank3(const Shape& s, const char* what) {
  if (s.rank() != 3) throw ShapeError(std::string(what) + ": expected a C x H x W tensor, got shape " + s.to_string());
}

/// Largest absolute elementwise difference; shapes must match.
template <typename T, typename U>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<U>& b) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("max_abs_diff: shape " + a.shape().to_string() + " vs " + b.shape().to_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    m = std::max(m, d < 0 ? -d : d);
  }
  return m;
}

}  // namespace edtk
