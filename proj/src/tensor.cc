// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/tensor.h"

#include <cmath>
#include <utility>

#include "depscreen/errors.h"

namespace depscreen {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) {
      throw ShapeError("tensor dimensions must be positive, got " +
                       shape_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> values;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(values));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = value;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on non-scalar tensor of shape " +
                     shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace depscreen
