// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_GRADCHECK_H_
#define DEPSCREEN_GRADCHECK_H_

#include <functional>
#include <map>
#include <string>

#include "depscreen/params.h"
#include "depscreen/tape.h"
#include "depscreen/tensor.h"

namespace depscreen {

// Builds a scalar from `input` on the given tape.
using ScalarFunction = std::function<Var(Tape&, Var input)>;
// Builds a scalar from bound parameters on the given tape.
using ParameterFunction =
    std::function<Var(Tape&, const BoundParameters& params)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double finite_difference_check(const ScalarFunction& f, const Tensor& point,
                               double eps);

// Same measure, reported per parameter tensor.
std::map<std::string, double> finite_difference_check(
    const ParameterFunction& f, const ParameterSet& params, double eps);

}  // namespace depscreen

#endif  // DEPSCREEN_GRADCHECK_H_
