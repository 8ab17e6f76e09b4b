#include "aunet/adam.hpp"

#include <cmath>

namespace aunet {

template <typename Scalar>
void adam_step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads,
               AdamState<Scalar>& state, double learning_rate) {
  if (!(learning_rate > 0)) throw ContractError("Adam learning rate must be positive");
  for (const auto& g : grads) {
    const Tensor<Scalar>& p = params.at(g.name);
    if (p.shape() != g.value.shape()) {
      throw ShapeError("Adam: parameter '" + g.name + "' has shape " + shape_string(p.shape()) +
                       " but gradient has " + shape_string(g.value.shape()));
    }
  }
  ++state.step;
  const AdamHyperparameters& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  const Scalar b1 = static_cast<Scalar>(h.beta1);
  const Scalar b2 = static_cast<Scalar>(h.beta2);
  const Scalar step_size = static_cast<Scalar>(learning_rate / correction1);
  const Scalar root_correction2 = static_cast<Scalar>(std::sqrt(correction2));
  const Scalar eps = static_cast<Scalar>(h.epsilon);

  for (const auto& g : grads) {
    Tensor<Scalar>& p = params.at(g.name);
    if (!state.first_moment.contains(g.name)) {
      state.first_moment.add(g.name, Tensor<Scalar>(p.shape()));
      state.second_moment.add(g.name, Tensor<Scalar>(p.shape()));
    }
    auto m = state.first_moment.at(g.name).vec().array();
    auto v = state.second_moment.at(g.name).vec().array();
    const auto grad = g.value.vec().array();
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.square();
    // p -= lr * m_hat / (sqrt(v_hat) + eps)
    p.vec().array() -= step_size * m / (v.sqrt() / root_correction2 + eps);
  }
}

template void adam_step(ParameterSet<float>&, const ParameterSet<float>&, AdamState<float>&,
                        double);
template void adam_step(ParameterSet<double>&, const ParameterSet<double>&, AdamState<double>&,
                        double);

}  // namespace aunet
