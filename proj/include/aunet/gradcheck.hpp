#ifndef AUNET_GRADCHECK_HPP
#define AUNET_GRADCHECK_HPP

#include "aunet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace aunet {

/// A scalar function of one tensor together with its claimed analytic gradient.
struct DifferentiableFunction {
  std::function<double(const TensorD&)> value;
  std::function<TensorD(const TensorD&)> gradient;
};

/// Central differences (f(x+h) - f(x-h)) / 2h for every coordinate.
inline TensorD numeric_gradient(const DifferentiableFunction& f, const TensorD& point,
                                double h = 1e-5) {
  TensorD probe = point;
  TensorD numeric(point.shape());
  for (Index i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f.value(probe);
    probe[i] = saved - h;
    const double down = f.value(probe);
    probe[i] = saved;
    numeric[i] = (up - down) / (2 * h);
  }
  return numeric;
}

inline TensorD checked_gradient(const DifferentiableFunction& f, const TensorD& point) {
  TensorD analytic = f.gradient(point);
  if (analytic.shape() != point.shape()) {
    throw ShapeError("gradient shape " + shape_string(analytic.shape()) +
                     " differs from point shape " + shape_string(point.shape()));
  }
  return analytic;
}

/// Largest per-coordinate relative disagreement between the analytic gradient and
/// central differences, where the relative error of one coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double finite_difference_check(const DifferentiableFunction& f, const TensorD& point,
                                      double h = 1e-5) {
  const TensorD analytic = checked_gradient(f, point);
  const TensorD numeric = numeric_gradient(f, point, h);
  double worst = 0;
  for (Index i = 0; i < point.size(); ++i) {
    const double err = std::abs(analytic[i] - numeric[i]) /
                       std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

/// ||analytic - numeric|| / max(1e-12, ||analytic|| + ||numeric||) over the whole
/// gradient. Suited to large parameter vectors, where coordinates with gradients near the
/// rounding floor of the differences would dominate a per-coordinate measure.
inline double finite_difference_norm_check(const DifferentiableFunction& f, const TensorD& point,
                                           double h = 1e-5) {
  const TensorD analytic = checked_gradient(f, point);
  const TensorD numeric = numeric_gradient(f, point, h);
  const double diff = (analytic.vec() - numeric.vec()).norm();
  return diff / std::max(1e-12, analytic.vec().norm() + numeric.vec().norm());
}

}  // namespace aunet

#endif  // AUNET_GRADCHECK_HPP
