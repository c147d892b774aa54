#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asmamba {

/// Dense row-major array of doubles with a small dynamic shape.
///
/// Network feature maps use rank 3 (channels, height, width). CT grids such
/// as images and sinograms use rank 2 (rows, cols). Scalars and vectors are
/// rank 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {
    for (int d : shape_) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    }
  }
  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != count(shape_)) {
      throw std::invalid_argument("Tensor: value count does not match shape");
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor chw(int c, int h, int w, double fill = 0.0) { return Tensor({c, h, w}, fill); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-3 accessors; rank-2 tensors are treated as a single channel.
  int channels() const { return rank() == 3 ? shape_[0] : 1; }
  int height() const { return shape_[static_cast<std::size_t>(rank() - 2)]; }
  int width() const { return shape_[static_cast<std::size_t>(rank() - 1)]; }
  std::size_t plane() const {
    return static_cast<std::size_t>(height()) * static_cast<std::size_t>(width());
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * width() + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * width() + c]; }
  double& at(int ch, int r, int c) {
    return data_[(static_cast<std::size_t>(ch) * height() + r) * width() + c];
  }
  double at(int ch, int r, int c) const {
    return data_[(static_cast<std::size_t>(ch) * height() + r) * width() + c];
  }

  double* channel(int ch) { return data_.data() + static_cast<std::size_t>(ch) * plane(); }
  const double* channel(int ch) const {
    return data_.data() + static_cast<std::size_t>(ch) * plane();
  }

  /// Same storage, new shape. Element count must match.
  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != data_.size()) throw std::invalid_argument("Tensor: bad reshape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    check_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
  double sum_squares() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, v < 0 ? -v : v);
    return m;
  }

  std::string shape_string() const;

  void check_same(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) {
      throw std::invalid_argument(std::string("shape mismatch in ") + what + ": " +
                                  shape_string() + " vs " + o.shape_string());
    }
  }

  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d < 0 ? 0 : d);
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
inline Tensor operator*(Tensor a, double s) { return a *= s; }
inline Tensor operator-(const Tensor& a, const Tensor& b) {
  a.check_same(b, "-");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace asmamba
