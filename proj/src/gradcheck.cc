// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "depscreen/errors.h"

namespace depscreen {
namespace {

void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ValidationError("finite-difference step must be positive");
  }
}

double checked(double v) {
  if (!std::isfinite(v)) throw NumericError("non-finite function evaluation");
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double finite_difference_check(const ScalarFunction& f, const Tensor& point,
                               double eps) {
  check_eps(eps);
  auto evaluate = [&](const Tensor& x) {
    Tape tape;
    Var in = tape.constant(x);
    return checked(tape.value(f(tape, in)).item());
  };

  Tape tape;
  Var in = tape.parameter(point);
  Var out = f(tape, in);
  checked(tape.value(out).item());
  const Tensor analytic = tape.backward(out).at(in.id);

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = evaluate(probe);
    probe[i] = point[i] - eps;
    const double down = evaluate(probe);
    probe[i] = point[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

std::map<std::string, double> finite_difference_check(
    const ParameterFunction& f, const ParameterSet& params, double eps) {
  check_eps(eps);
  auto evaluate = [&](const ParameterSet& p) {
    Tape tape;
    BoundParameters bound(tape, p, false);
    return checked(tape.value(f(tape, bound)).item());
  };

  Tape tape;
  BoundParameters bound(tape, params, true);
  Var out = f(tape, bound);
  checked(tape.value(out).item());
  const NamedGradients analytic = bound.gradients(tape.backward(out));

  std::map<std::string, double> report;
  ParameterSet probe = params;
  for (const auto& [name, original] : params) {
    double worst = 0.0;
    Tensor& p = probe.get_mutable(name);
    const Tensor& g = analytic.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = original[i] + eps;
      const double up = evaluate(probe);
      p[i] = original[i] - eps;
      const double down = evaluate(probe);
      p[i] = original[i];
      worst = std::max(worst, relative_error(g[i], (up - down) / (2 * eps)));
    }
    report.emplace(name, worst);
  }
  return report;
}

}  // namespace depscreen
