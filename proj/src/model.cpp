#include "aunet/model.hpp"

#include <cmath>
#include <random>

namespace aunet {

void ModelConfig::validate() const {
  if (in_channels < 1) throw ContractError("model in_channels must be >= 1");
  if (num_classes < 2) throw ContractError("model num_classes must be >= 2");
  if (depth < 1 || depth > 8) throw ContractError("model depth must be in [1,8]");
  if (base_filters < 2) throw ContractError("model base_filters must be >= 2");
}

bool ModelConfig::same_topology(const ModelConfig& other) const {
  return in_channels == other.in_channels && num_classes == other.num_classes &&
         depth == other.depth && base_filters == other.base_filters &&
         attention == other.attention;
}

namespace {

template <typename Scalar>
void add_conv(ParameterSet<Scalar>& set, const std::string& name, Index out, Index in, Index k,
              bool bias = true) {
  set.add(name + ".weight", Tensor<Scalar>({out, in, k, k}));
  if (bias) set.add(name + ".bias", Tensor<Scalar>({out}));
}

Index fan_in(const std::string& name, const Shape& shape) {
  // Transposed-conv kernels are [Cin,Cout,2,2]; each output sees Cin taps.
  if (name.find(".up.") != std::string::npos) return shape[0];
  return shape[1] * shape[2] * shape[3];
}

}  // namespace

template <typename Scalar>
ParameterSet<Scalar> parameter_layout(const ModelConfig& config) {
  config.validate();
  ParameterSet<Scalar> set;
  Index in = config.in_channels;
  for (int i = 0; i < config.depth; ++i) {
    const Index f = config.filters_at(i);
    const std::string p = "enc" + std::to_string(i);
    add_conv(set, p + ".conv1", f, in, 3);
    add_conv(set, p + ".conv2", f, f, 3);
    in = f;
  }
  const Index fb = config.bottleneck_filters();
  add_conv(set, "bottleneck.conv1", fb, in, 3);
  add_conv(set, "bottleneck.conv2", fb, fb, 3);
  for (int i = config.depth - 1; i >= 0; --i) {
    const Index f = config.filters_at(i);
    const std::string p = "dec" + std::to_string(i);
    set.add(p + ".up.weight", Tensor<Scalar>({2 * f, f, 2, 2}));
    set.add(p + ".up.bias", Tensor<Scalar>({f}));
    if (config.attention) {
      const Index inter = std::max<Index>(1, f / 2);
      add_conv(set, p + ".gate.w_g", inter, f, 1, false);
      add_conv(set, p + ".gate.w_x", inter, f, 1);
      add_conv(set, p + ".gate.psi", 1, inter, 1);
    }
    add_conv(set, p + ".conv1", f, 2 * f, 3);
    add_conv(set, p + ".conv2", f, f, 3);
  }
  add_conv(set, "head", config.num_classes, config.filters_at(0), 1);
  return set;
}

template <typename Scalar>
AttentionUNet<Scalar> build_model(const ModelConfig& config) {
  AttentionUNet<Scalar> model{config, parameter_layout<Scalar>(config)};
  std::mt19937_64 rng(config.seed);
  for (auto& entry : model.params) {
    if (entry.value.rank() == 1) continue;  // biases stay zero
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(fan_in(entry.name, entry.value.shape()))));
    for (Index i = 0; i < entry.value.size(); ++i) entry.value[i] = static_cast<Scalar>(normal(rng));
  }
  return model;
}

template <typename Scalar>
BoundModel<Scalar>::BoundModel(Graph<Scalar>& graph, const AttentionUNet<Scalar>& model,
                               bool trainable)
    : graph_(&graph), config_(model.config) {
  vars_.reserve(model.params.size());
  for (const auto& entry : model.params) {
    vars_.emplace_back(entry.name, graph.leaf(entry.value, trainable));
  }
}

template <typename Scalar>
bool BoundModel<Scalar>::has(const std::string& name) const {
  for (const auto& [n, v] : vars_) {
    if (n == name) return true;
  }
  return false;
}

template <typename Scalar>
Var BoundModel<Scalar>::operator[](const std::string& name) const {
  for (const auto& [n, v] : vars_) {
    if (n == name) return v;
  }
  throw ContractError("model has no parameter '" + name + "'");
}

template <typename Scalar>
ParameterSet<Scalar> BoundModel<Scalar>::gradients() const {
  ParameterSet<Scalar> out;
  for (const auto& [n, v] : vars_) out.add(n, graph_->grad(v));
  return out;
}

namespace {

template <typename Scalar>
Var conv_relu(const BoundModel<Scalar>& m, Var x, const std::string& name) {
  Graph<Scalar>& g = m.graph();
  return g.relu(g.conv2d(x, m[name + ".weight"], m[name + ".bias"], kernels::Padding::Same));
}

}  // namespace

template <typename Scalar>
EncoderOutput encoder_block(const BoundModel<Scalar>& model, Var input, const std::string& prefix) {
  Var h = conv_relu(model, input, prefix + ".conv1");
  h = conv_relu(model, h, prefix + ".conv2");
  return {h, model.graph().maxpool2x2(h)};
}

template <typename Scalar>
Var attention_gate(const BoundModel<Scalar>& model, Var skip, Var gate, const std::string& prefix,
                   Var* alpha_out) {
  Graph<Scalar>& g = model.graph();
  const Tensor<Scalar>& s = g.value(skip);
  const Tensor<Scalar>& q = g.value(gate);
  if (s.rank() != 4 || q.rank() != 4 || s.dim(0) != q.dim(0) || s.dim(2) != q.dim(2) ||
      s.dim(3) != q.dim(3)) {
    throw ShapeError("attention gate: skip " + shape_string(s.shape()) + " and gate " +
                     shape_string(q.shape()) + " differ in resolution");
  }
  using kernels::Padding;
  Var from_gate = g.conv2d(gate, model[prefix + ".w_g.weight"], std::nullopt, Padding::Same);
  Var from_skip =
      g.conv2d(skip, model[prefix + ".w_x.weight"], model[prefix + ".w_x.bias"], Padding::Same);
  Var joint = g.relu(g.add(from_gate, from_skip));
  Var alpha = g.sigmoid(
      g.conv2d(joint, model[prefix + ".psi.weight"], model[prefix + ".psi.bias"], Padding::Same));
  if (alpha_out) *alpha_out = alpha;
  return g.mul(skip, alpha);
}

template <typename Scalar>
Var decoder_block(const BoundModel<Scalar>& model, Var input, Var skip, const std::string& prefix,
                  std::vector<Var>* attention_maps) {
  Graph<Scalar>& g = model.graph();
  Var up = g.conv_transpose2x2(input, model[prefix + ".up.weight"], model[prefix + ".up.bias"]);
  Var bridge = skip;
  if (model.config().attention) {
    Var alpha{};
    bridge = attention_gate(model, skip, up, prefix + ".gate", &alpha);
    if (attention_maps) attention_maps->push_back(alpha);
  }
  Var h = g.concat_channels(bridge, up);
  h = conv_relu(model, h, prefix + ".conv1");
  return conv_relu(model, h, prefix + ".conv2");
}

template <typename Scalar>
ForwardOutput forward(const BoundModel<Scalar>& model, Var input) {
  Graph<Scalar>& g = model.graph();
  const ModelConfig& cfg = model.config();
  const Tensor<Scalar>& x = g.value(input);
  const Index multiple = Index(1) << cfg.depth;
  if (x.rank() != 4 || x.dim(1) != cfg.in_channels || x.dim(2) % multiple != 0 ||
      x.dim(3) % multiple != 0) {
    throw ShapeError("model input " + shape_string(x.shape()) + " must be [N," +
                     std::to_string(cfg.in_channels) + ",H,W] with H and W divisible by " +
                     std::to_string(multiple));
  }
  std::vector<Var> skips;
  Var h = input;
  for (int i = 0; i < cfg.depth; ++i) {
    EncoderOutput e = encoder_block(model, h, "enc" + std::to_string(i));
    skips.push_back(e.features);
    h = e.pooled;
  }
  h = conv_relu(model, h, "bottleneck.conv1");
  h = conv_relu(model, h, "bottleneck.conv2");
  ForwardOutput out;
  for (int i = cfg.depth - 1; i >= 0; --i) {
    h = decoder_block(model, h, skips[static_cast<std::size_t>(i)], "dec" + std::to_string(i),
                      &out.attention_maps);
  }
  out.penultimate = h;
  out.logits = g.conv2d(h, model["head.weight"], model["head.bias"], kernels::Padding::Same);
  out.probs = g.softmax_channels(out.logits);
  return out;
}

template <typename Scalar>
Tensor<Scalar> predict(const AttentionUNet<Scalar>& model, const Tensor<Scalar>& batch) {
  Graph<Scalar> g;
  BoundModel<Scalar> bound(g, model, false);
  const ForwardOutput out = forward(bound, g.constant(batch));
  return g.value(out.probs);
}

#define AUNET_INSTANTIATE_MODEL(T)                                                           \
  template ParameterSet<T> parameter_layout<T>(const ModelConfig&);                          \
  template AttentionUNet<T> build_model<T>(const ModelConfig&);                              \
  template class BoundModel<T>;                                                              \
  template EncoderOutput encoder_block(const BoundModel<T>&, Var, const std::string&);       \
  template Var attention_gate(const BoundModel<T>&, Var, Var, const std::string&, Var*);    \
  template Var decoder_block(const BoundModel<T>&, Var, Var, const std::string&,            \
                             std::vector<Var>*);                                             \
  template ForwardOutput forward(const BoundModel<T>&, Var);                                 \
  template Tensor<T> predict(const AttentionUNet<T>&, const Tensor<T>&);

AUNET_INSTANTIATE_MODEL(float)
AUNET_INSTANTIATE_MODEL(double)

#undef AUNET_INSTANTIATE_MODEL

}  // namespace aunet
