#ifndef AUNET_GRAPH_HPP
#define AUNET_GRAPH_HPP

#include "aunet/kernels.hpp"
#include "aunet/tensor.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace aunet {

/// Handle to a node of a Graph. Only meaningful for the graph that created it.
struct Var {
  std::size_t id = 0;
};

enum class OpKind {
  Leaf,
  Conv2d,
  ConvTranspose2x2,
  MaxPool2x2,
  Relu,
  Sigmoid,
  SoftmaxChannels,
  ConcatChannels,
  Mul,
  Add,
  Sum,
  Affine,
  CrossEntropy,
  SoftDice,
  MeanClassDice,
  ChannelScore,
};

std::string_view op_name(OpKind kind);

enum class Activation { Relu, Sigmoid };

/// Reverse-mode tape. Nodes are appended in evaluation order, so every node's inputs
/// precede it and a single reverse sweep visits the graph topologically.
///
/// The scalar type selects precision: float for training, double for gradient checks.
template <typename Scalar>
class Graph {
 public:
  using TensorT = Tensor<Scalar>;

  Var leaf(TensorT value, bool requires_grad);
  Var constant(TensorT value) { return leaf(std::move(value), false); }
  Var variable(TensorT value) { return leaf(std::move(value), true); }

  Var conv2d(Var input, Var kernel, std::optional<Var> bias, kernels::Padding padding);
  Var conv_transpose2x2(Var input, Var kernel, std::optional<Var> bias);
  Var maxpool2x2(Var input);
  Var activation(Var input, Activation kind);
  Var relu(Var input) { return activation(input, Activation::Relu); }
  Var sigmoid(Var input) { return activation(input, Activation::Sigmoid); }
  Var softmax_channels(Var logits);
  Var concat_channels(Var a, Var b);
  /// Hadamard product; b may be [N,1,H,W] and broadcast over a's channels.
  Var mul(Var a, Var b);
  Var add(Var a, Var b);
  Var sum(Var input);
  Var affine(Var input, Scalar scale, Scalar shift);

  /// Mean over pixels of -sum_c target*log(probs + 1e-12).
  Var cross_entropy(Var probs, Var target);
  /// Global soft Dice over every element of every channel.
  Var soft_dice(Var probs, Var target, double epsilon);
  /// Mean over channels of the per-channel soft Dice.
  Var mean_class_dice(Var probs, Var target, double epsilon);
  /// Sum of the selected channels of [N,C,H,W]; with `pixel_mask` ([N,1,H,W], 0/1)
  /// only pixels where the mask is set contribute.
  Var channel_score(Var input, const std::vector<int>& channels,
                    const TensorT* pixel_mask = nullptr);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Every node ends with a
  /// gradient of its value's shape; nodes the loss does not depend on get zeros.
  void backward(Var loss);

  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  const TensorT& grad(Var v) const;
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t count(OpKind kind) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    TensorT value;
    TensorT grad;
    bool requires_grad;
    std::function<void(Graph&, std::size_t)> backward;
  };

  Var push(OpKind kind, std::vector<std::size_t> inputs, TensorT value,
           std::function<void(Graph&, std::size_t)> backward);
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  TensorT& grad_slot(std::size_t id);
  void check(Var v) const;

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace aunet

#endif  // AUNET_GRAPH_HPP
