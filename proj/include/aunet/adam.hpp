#ifndef AUNET_ADAM_HPP
#define AUNET_ADAM_HPP

#include "aunet/parameters.hpp"

#include <cstdint>

namespace aunet {

struct AdamHyperparameters {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per parameter plus the step counter.
template <typename Scalar>
struct AdamState {
  AdamHyperparameters hyper;
  ParameterSet<Scalar> first_moment;
  ParameterSet<Scalar> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of every parameter that has a gradient entry.
/// Moments are created zero-initialized on first use.
template <typename Scalar>
void adam_step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads,
               AdamState<Scalar>& state, double learning_rate);

extern template void adam_step(ParameterSet<float>&, const ParameterSet<float>&,
                               AdamState<float>&, double);
extern template void adam_step(ParameterSet<double>&, const ParameterSet<double>&,
                               AdamState<double>&, double);

}  // namespace aunet

#endif  // AUNET_ADAM_HPP
