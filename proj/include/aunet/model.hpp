#ifndef AUNET_MODEL_HPP
#define AUNET_MODEL_HPP

#include "aunet/graph.hpp"
#include "aunet/parameters.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace aunet {

/// Topology of the attention-gated U-Net.
///
/// Encoder level i has base_filters * 2^i filters; the bottleneck has
/// base_filters * 2^depth (1024 for base 64, depth 4). Inputs must have H and W
/// divisible by 2^depth.
struct ModelConfig {
  int in_channels = 2;
  int num_classes = 4;
  int depth = 4;
  int base_filters = 8;
  bool attention = true;
  std::uint64_t seed = 1;

  int filters_at(int level) const { return base_filters << level; }
  int bottleneck_filters() const { return filters_at(depth); }
  void validate() const;

  /// Equality of everything that shapes the parameter set (the seed is ignored).
  bool same_topology(const ModelConfig& other) const;
};

/// Parameter naming, in creation order:
///   enc{i}.conv1.weight|bias, enc{i}.conv2.weight|bias            i = 0..depth-1
///   bottleneck.conv1.weight|bias, bottleneck.conv2.weight|bias
///   dec{i}.up.weight|bias                                          i = depth-1..0
///   dec{i}.gate.w_g.weight, dec{i}.gate.w_x.weight|bias,
///   dec{i}.gate.psi.weight|bias                                    (attention only)
///   dec{i}.conv1.weight|bias, dec{i}.conv2.weight|bias
///   head.weight|bias
template <typename Scalar>
struct AttentionUNet {
  ModelConfig config;
  ParameterSet<Scalar> params;

  template <typename To>
  AttentionUNet<To> cast() const {
    return AttentionUNet<To>{config, params.template cast<To>()};
  }
};

/// Name of the layer whose activations feed Grad-CAM: the last 3x3 convolution
/// (after its relu) before the 1x1 classification head.
inline constexpr const char* kPenultimateLayer = "dec0.conv2";

/// Every parameter name and shape for `config`, zero-filled.
template <typename Scalar>
ParameterSet<Scalar> parameter_layout(const ModelConfig& config);

/// He fan-in normal kernels drawn from a generator seeded with config.seed; zero biases.
template <typename Scalar>
AttentionUNet<Scalar> build_model(const ModelConfig& config);

/// A model's parameters placed on a graph as leaves.
template <typename Scalar>
class BoundModel {
 public:
  BoundModel(Graph<Scalar>& graph, const AttentionUNet<Scalar>& model, bool trainable = true);

  Var operator[](const std::string& name) const;
  bool has(const std::string& name) const;
  Graph<Scalar>& graph() const { return *graph_; }
  const ModelConfig& config() const { return config_; }

  /// Gradients of every parameter after graph().backward().
  ParameterSet<Scalar> gradients() const;

 private:
  Graph<Scalar>* graph_;
  ModelConfig config_;
  std::vector<std::pair<std::string, Var>> vars_;
};

struct EncoderOutput {
  Var features;  // pre-pool activations, the skip connection
  Var pooled;
};

/// conv3x3+relu, conv3x3+relu, maxpool 2x2. `prefix` selects the parameters, e.g. "enc0".
template <typename Scalar>
EncoderOutput encoder_block(const BoundModel<Scalar>& model, Var input, const std::string& prefix);

/// Additive attention gate: alpha = sigmoid(psi * relu(W_g*gate + W_x*skip + b1) + b2),
/// returns skip * alpha broadcast over channels. alpha is written to `alpha_out` if given.
template <typename Scalar>
Var attention_gate(const BoundModel<Scalar>& model, Var skip, Var gate, const std::string& prefix,
                   Var* alpha_out = nullptr);

/// Transposed-conv upsample, gate the skip (when attention is on), concat
/// [skip, upsampled], then two conv3x3+relu.
template <typename Scalar>
Var decoder_block(const BoundModel<Scalar>& model, Var input, Var skip, const std::string& prefix,
                  std::vector<Var>* attention_maps = nullptr);

struct ForwardOutput {
  Var logits;
  Var probs;
  Var penultimate;
  std::vector<Var> attention_maps;  // deepest decoder first
};

template <typename Scalar>
ForwardOutput forward(const BoundModel<Scalar>& model, Var input);

/// Inference without gradient bookkeeping. Returns softmax probabilities [N,classes,H,W].
template <typename Scalar>
Tensor<Scalar> predict(const AttentionUNet<Scalar>& model, const Tensor<Scalar>& batch);

/// Per-pixel argmax over channels, lowest class index on ties.
template <typename Scalar>
LabelMap predict_mask(const Tensor<Scalar>& probs) {
  return kernels::argmax_channels(probs);
}

}  // namespace aunet

#endif  // AUNET_MODEL_HPP
