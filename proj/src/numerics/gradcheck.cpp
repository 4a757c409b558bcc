// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace sipm {

Tensor<double> finite_difference_gradient(const std::function<double(const Tensor<double>&)>& f,
                                          const Tensor<double>& point, double h) {
  if (!(h > 0.0)) throw UsageError("finite_difference_gradient: step must be positive");
  Tensor<double> grad(point.shape());
  Tensor<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x0 = point[i];
    probe[i] = x0 + h;
    const double fp = f(probe);
    probe[i] = x0 - h;
    const double fm = f(probe);
    probe[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_difference_gradient: non-finite f at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Tensor<double>& a, const Tensor<double>& b, double floor) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_relative_error: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double diff = 0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace sipm
