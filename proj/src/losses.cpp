#include "aunet/losses.hpp"

#include <cmath>

namespace aunet {

LossKind parse_loss_kind(const std::string& name) {
  if (name == "combined") return LossKind::Combined;
  if (name == "categorical_dice") return LossKind::CategoricalDice;
  throw ContractError("unknown loss '" + name + "' (expected combined or categorical_dice)");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::Combined ? "combined" : "categorical_dice";
}

namespace {

template <typename Scalar>
void require_match(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": y_true " + shape_string(a.shape()) +
                     " vs y_pred " + shape_string(b.shape()));
  }
}

}  // namespace

template <typename Scalar>
double dice_coefficient(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                        double epsilon) {
  require_match(y_true, y_pred, "dice_coefficient");
  const auto t = y_true.vec().template cast<double>();
  const auto p = y_pred.vec().template cast<double>();
  return (2.0 * t.dot(p) + epsilon) / (t.sum() + p.sum() + epsilon);
}

template <typename Scalar>
std::vector<double> per_class_dice(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                                   double epsilon) {
  require_match(y_true, y_pred, "per_class_dice");
  require_rank4(y_true, "per_class_dice input");
  const Index n = y_true.dim(0), c = y_true.dim(1), plane = y_true.dim(2) * y_true.dim(3);
  std::vector<double> out;
  for (Index k = 0; k < c; ++k) {
    double inter = 0, st = 0, sp = 0;
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + k) * plane;
      const auto t = y_true.vec().segment(off, plane).template cast<double>();
      const auto p = y_pred.vec().segment(off, plane).template cast<double>();
      inter += t.dot(p);
      st += t.sum();
      sp += p.sum();
    }
    out.push_back((2.0 * inter + epsilon) / (st + sp + epsilon));
  }
  return out;
}

template <typename Scalar>
double cross_entropy(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred) {
  require_match(y_true, y_pred, "cross_entropy");
  require_rank4(y_true, "cross_entropy input");
  double total = 0;
  for (Index i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != Scalar(0)) {
      total -= static_cast<double>(y_true[i]) *
               std::log(static_cast<double>(y_pred[i]) + kCrossEntropyClamp);
    }
  }
  return total / static_cast<double>(y_true.dim(0) * y_true.dim(2) * y_true.dim(3));
}

template <typename Scalar>
double combined_loss(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred, double epsilon) {
  return cross_entropy(y_true, y_pred) + (1.0 - dice_coefficient(y_true, y_pred, epsilon));
}

template <typename Scalar>
double categorical_dice_loss(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                             double epsilon) {
  const std::vector<double> dice = per_class_dice(y_true, y_pred, epsilon);
  double mean = 0;
  for (double d : dice) mean += d;
  return 1.0 - mean / static_cast<double>(dice.size());
}

template <typename Scalar>
Var loss_node(Graph<Scalar>& graph, Var probs, Var target, LossKind kind, double epsilon) {
  const Var ce = graph.cross_entropy(probs, target);
  const Var overlap = kind == LossKind::Combined ? graph.soft_dice(probs, target, epsilon)
                                                 : graph.mean_class_dice(probs, target, epsilon);
  return graph.add(ce, graph.affine(overlap, Scalar(-1), Scalar(1)));
}

#define AUNET_INSTANTIATE_LOSSES(T)                                                          \
  template double dice_coefficient(const Tensor<T>&, const Tensor<T>&, double);              \
  template std::vector<double> per_class_dice(const Tensor<T>&, const Tensor<T>&, double);   \
  template double cross_entropy(const Tensor<T>&, const Tensor<T>&);                         \
  template double combined_loss(const Tensor<T>&, const Tensor<T>&, double);                 \
  template double categorical_dice_loss(const Tensor<T>&, const Tensor<T>&, double);         \
  template Var loss_node(Graph<T>&, Var, Var, LossKind, double);

AUNET_INSTANTIATE_LOSSES(float)
AUNET_INSTANTIATE_LOSSES(double)

#undef AUNET_INSTANTIATE_LOSSES

}  // namespace aunet
