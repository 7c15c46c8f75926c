// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_TENSOR_H_
#define DEPSCREEN_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace depscreen {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Every dimension is >= 1, so the
// element count is never zero. Rank is unrestricted, but most operations
// treat the tensor as `outer() x last_dim()`.
class Tensor {
 public:
  Tensor();  // scalar 0
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t last_dim() const { return shape_.back(); }
  std::size_t outer() const { return data_.size() / shape_.back(); }
  // Two-dimensional accessors; rank-1 tensors act as a single row.
  std::size_t rows() const {
    return shape_.size() == 1 ? 1 : data_.size() / shape_.back();
  }
  std::size_t cols() const { return shape_.back(); }
  bool is_scalar() const { return data_.size() == 1; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool value) { requires_grad_ = value; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_.back() + c];
  }
  double item() const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

}  // namespace depscreen

#endif  // DEPSCREEN_TENSOR_H_
