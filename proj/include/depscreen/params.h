// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_PARAMS_H_
#define DEPSCREEN_PARAMS_H_

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "depscreen/random.h"
#include "depscreen/tape.h"
#include "depscreen/tensor.h"

namespace depscreen {

// Named parameter tensors, iterated in name order so that serialization and
// optimizer updates are deterministic.
class ParameterSet {
 public:
  void set(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get_mutable(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  // Copies every tensor of `other` under `prefix` + name.
  void merge(const ParameterSet& other, std::string_view prefix = {});
  // Subset whose names start with `prefix`, with the prefix stripped.
  ParameterSet extract(std::string_view prefix) const;

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.tensors_ == b.tensors_;
  }

 private:
  std::map<std::string, Tensor> tensors_;
};

using NamedGradients = std::map<std::string, Tensor>;

// Parameters placed on a tape as leaves.
class BoundParameters {
 public:
  BoundParameters(Tape& tape, const ParameterSet& params, bool trainable);

  Var operator[](const std::string& name) const;
  NamedGradients gradients(const GradientMap& grads) const;

 private:
  std::map<std::string, Var> vars_;
};

// Glorot-uniform matrix in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace depscreen

#endif  // DEPSCREEN_PARAMS_H_
