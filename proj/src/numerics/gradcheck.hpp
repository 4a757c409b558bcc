// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>

#include "numerics/tensor.hpp"

namespace sipm {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate
// of `point`. Runs in 64-bit; throws NumericError if f is non-finite at any
// probe.
Tensor<double> finite_difference_gradient(const std::function<double(const Tensor<double>&)>& f,
                                          const Tensor<double>& point, double h = 1e-5);

// max|a - b| / max(max|a|, max|b|, floor). Norm-wise so that coordinates with
// near-zero gradient do not dominate.
double max_relative_error(const Tensor<double>& a, const Tensor<double>& b, double floor = 1e-12);

}  // namespace sipm
