// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/params.h"

#include <cmath>
#include <utility>

#include "depscreen/errors.h"

namespace depscreen {

void ParameterSet::set(const std::string& name, Tensor value) {
  value.set_requires_grad(true);
  tensors_.insert_or_assign(name, std::move(value));
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw NotFoundError("no parameter named " + name);
  return it->second;
}

Tensor& ParameterSet::get_mutable(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw NotFoundError("no parameter named " + name);
  return it->second;
}

bool ParameterSet::contains(const std::string& name) const {
  return tensors_.count(name) != 0;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void ParameterSet::merge(const ParameterSet& other, std::string_view prefix) {
  for (const auto& [name, t] : other.tensors_) {
    set(std::string(prefix) + name, t);
  }
}

ParameterSet ParameterSet::extract(std::string_view prefix) const {
  ParameterSet out;
  for (const auto& [name, t] : tensors_) {
    if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
      out.set(name.substr(prefix.size()), t);
    }
  }
  return out;
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params,
                                 bool trainable) {
  for (const auto& [name, t] : params) {
    vars_.emplace(name, tape.leaf(t, trainable));
  }
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw NotFoundError("no bound parameter named " + name);
  return it->second;
}

NamedGradients BoundParameters::gradients(const GradientMap& grads) const {
  NamedGradients out;
  for (const auto& [name, var] : vars_) {
    auto it = grads.find(var.id);
    if (it != grads.end()) out.emplace(name, it->second);
  }
  return out;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace depscreen
