// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_OPTIMIZER_H_
#define DEPSCREEN_OPTIMIZER_H_

#include <cstdint>
#include <map>
#include <string>

#include "depscreen/params.h"
#include "depscreen/tensor.h"

namespace depscreen {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected adaptive-moment update. Parameters without an entry in
// `grads` are treated as having zero gradient.
void adam_step(ParameterSet& params, const NamedGradients& grads,
               OptimizerState& state, const AdamConfig& config);

}  // namespace depscreen

#endif  // DEPSCREEN_OPTIMIZER_H_
