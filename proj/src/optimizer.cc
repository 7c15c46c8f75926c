// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/optimizer.h"

#include <cmath>

#include "depscreen/errors.h"

namespace depscreen {

void adam_step(ParameterSet& params, const NamedGradients& grads,
               OptimizerState& state, const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) {
      throw ShapeError("gradient for unknown parameter " + name);
    }
    if (!g.same_shape(params.get(name))) {
      throw ShapeError("gradient shape " + shape_string(g.shape()) +
                       " does not match parameter " + name + " " +
                       shape_string(params.get(name).shape()));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (const auto& [name, current] : params) {
    Tensor& p = params.get_mutable(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw ShapeError("optimizer state shape mismatch for " + name);
    }
    auto git = grads.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = git == grads.end() ? 0.0 : git->second[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace depscreen
