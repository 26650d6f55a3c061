#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fscil/error.hpp"

namespace fscil {

// Dense row-major tensor of doubles. Plain value type with shape + storage;
// all differentiable math lives in the tape (autodiff.hpp).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    v_.assign(count(shape_), 0.0);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != count(shape_)) {
      throw ConfigError("tensor: value count " + std::to_string(v_.size()) +
                        " does not match shape " + shape_str());
    }
  }

  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  static Tensor filled(std::vector<std::size_t> shape, double x) {
    Tensor t(std::move(shape));
    for (auto& e : t.v_) e = x;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return v_.size(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  // 2-D helpers.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 0; }
  std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : 0; }
  double& operator()(std::size_t r, std::size_t c) { return v_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v_[r * shape_[1] + c]; }

  // 4-D helper for image batches [b, c, h, w].
  double& operator()(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
    return v_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return v_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ConfigError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    if (d > m) m = d;
  }
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace fscil
