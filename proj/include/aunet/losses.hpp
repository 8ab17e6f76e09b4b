#ifndef AUNET_LOSSES_HPP
#define AUNET_LOSSES_HPP

#include "aunet/graph.hpp"
#include "aunet/tensor.hpp"

#include <string>
#include <vector>

namespace aunet {

/// Smoothing term of every Dice-style ratio.
inline constexpr double kDiceEpsilon = 1e-6;
/// Probabilities are offset by this before the log in cross-entropy.
inline constexpr double kCrossEntropyClamp = 1e-12;

enum class LossKind {
  Combined,         // cross-entropy + (1 - global soft Dice)
  CategoricalDice,  // cross-entropy + (1 - mean per-class soft Dice)
};

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// (2 * sum(t*p) + eps) / (sum(t) + sum(p) + eps) over all elements of all channels.
template <typename Scalar>
double dice_coefficient(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                        double epsilon = kDiceEpsilon);

/// Soft Dice of each channel of [N,C,H,W], computed over that channel only.
template <typename Scalar>
std::vector<double> per_class_dice(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                                   double epsilon = kDiceEpsilon);

/// Mean over pixels of -sum_c t_c * log(p_c + 1e-12).
template <typename Scalar>
double cross_entropy(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred);

/// cross_entropy + (1 - dice_coefficient).
template <typename Scalar>
double combined_loss(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                     double epsilon = kDiceEpsilon);

/// 1 - mean of per_class_dice.
template <typename Scalar>
double categorical_dice_loss(const Tensor<Scalar>& y_true, const Tensor<Scalar>& y_pred,
                             double epsilon = kDiceEpsilon);

/// Differentiable training objective on a graph; returns a scalar node.
template <typename Scalar>
Var loss_node(Graph<Scalar>& graph, Var probs, Var target, LossKind kind,
              double epsilon = kDiceEpsilon);

}  // namespace aunet

#endif  // AUNET_LOSSES_HPP
