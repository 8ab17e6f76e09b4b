#include "aunet/graph.hpp"

#include <cmath>
#include <string>

namespace aunet {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::ConvTranspose2x2: return "conv_transpose2x2";
    case OpKind::MaxPool2x2: return "maxpool2x2";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::SoftmaxChannels: return "softmax_channels";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::Mul: return "mul";
    case OpKind::Add: return "add";
    case OpKind::Sum: return "sum";
    case OpKind::Affine: return "affine";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::SoftDice: return "soft_dice";
    case OpKind::MeanClassDice: return "mean_class_dice";
    case OpKind::ChannelScore: return "channel_score";
  }
  return "unknown";
}

namespace {

constexpr double kLogClamp = 1e-12;

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

}  // namespace

template <typename Scalar>
void Graph<Scalar>::check(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
}

template <typename Scalar>
Var Graph<Scalar>::push(OpKind kind, std::vector<std::size_t> inputs, TensorT value,
                        std::function<void(Graph&, std::size_t)> backward) {
  bool requires_grad = false;
  for (std::size_t in : inputs) requires_grad = requires_grad || nodes_[in].requires_grad;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), TensorT(), requires_grad,
                        std::move(backward)});
  return Var{nodes_.size() - 1};
}

template <typename Scalar>
typename Graph<Scalar>::TensorT& Graph<Scalar>::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad = TensorT(node.value.shape());
  return node.grad;
}

template <typename Scalar>
const typename Graph<Scalar>::TensorT& Graph<Scalar>::grad(Var v) const {
  check(v);
  const Node& node = nodes_[v.id];
  if (node.grad.empty()) throw ContractError("gradient requested before backward()");
  return node.grad;
}

template <typename Scalar>
std::size_t Graph<Scalar>::count(OpKind kind) const {
  std::size_t n = 0;
  for (const Node& node : nodes_) n += node.kind == kind ? 1 : 0;
  return n;
}

template <typename Scalar>
Var Graph<Scalar>::leaf(TensorT value, bool requires_grad) {
  nodes_.push_back(Node{OpKind::Leaf, {}, std::move(value), TensorT(), requires_grad, nullptr});
  return Var{nodes_.size() - 1};
}

template <typename Scalar>
Var Graph<Scalar>::conv2d(Var input, Var kernel, std::optional<Var> bias,
                          kernels::Padding padding) {
  check(input);
  check(kernel);
  if (bias) check(*bias);
  TensorT out = kernels::conv2d(value(input), value(kernel), bias ? &value(*bias) : nullptr,
                                padding);
  std::vector<std::size_t> inputs{input.id, kernel.id};
  if (bias) inputs.push_back(bias->id);
  return push(OpKind::Conv2d, std::move(inputs), std::move(out),
              [padding](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t x = node.inputs[0], k = node.inputs[1];
                const bool has_bias = node.inputs.size() == 3;
                kernels::conv2d_backward(
                    g.nodes_[x].value, g.nodes_[k].value, node.grad, padding,
                    g.wants_grad(x) ? &g.grad_slot(x) : nullptr,
                    g.wants_grad(k) ? &g.grad_slot(k) : nullptr,
                    has_bias && g.wants_grad(node.inputs[2]) ? &g.grad_slot(node.inputs[2])
                                                             : nullptr);
              });
}

template <typename Scalar>
Var Graph<Scalar>::conv_transpose2x2(Var input, Var kernel, std::optional<Var> bias) {
  check(input);
  check(kernel);
  if (bias) check(*bias);
  TensorT out =
      kernels::conv_transpose2x2(value(input), value(kernel), bias ? &value(*bias) : nullptr);
  std::vector<std::size_t> inputs{input.id, kernel.id};
  if (bias) inputs.push_back(bias->id);
  return push(OpKind::ConvTranspose2x2, std::move(inputs), std::move(out),
              [](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t x = node.inputs[0], k = node.inputs[1];
                const bool has_bias = node.inputs.size() == 3;
                kernels::conv_transpose2x2_backward(
                    g.nodes_[x].value, g.nodes_[k].value, node.grad,
                    g.wants_grad(x) ? &g.grad_slot(x) : nullptr,
                    g.wants_grad(k) ? &g.grad_slot(k) : nullptr,
                    has_bias && g.wants_grad(node.inputs[2]) ? &g.grad_slot(node.inputs[2])
                                                             : nullptr);
              });
}

template <typename Scalar>
Var Graph<Scalar>::maxpool2x2(Var input) {
  check(input);
  std::vector<std::int64_t> argmax;
  TensorT out = kernels::maxpool2x2(value(input), &argmax);
  return push(OpKind::MaxPool2x2, {input.id}, std::move(out),
              [argmax = std::move(argmax)](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t x = node.inputs[0];
                if (!g.wants_grad(x)) return;
                TensorT& dx = g.grad_slot(x);
                for (std::size_t o = 0; o < argmax.size(); ++o) {
                  dx[argmax[o]] += node.grad[static_cast<Index>(o)];
                }
              });
}

template <typename Scalar>
Var Graph<Scalar>::activation(Var input, Activation kind) {
  check(input);
  const TensorT& x = value(input);
  if (kind == Activation::Relu) {
    TensorT out(x.shape(), x.vec().cwiseMax(Scalar(0)));
    return push(OpKind::Relu, {input.id}, std::move(out), [](Graph& g, std::size_t self) {
      const Node& node = g.nodes_[self];
      const std::size_t in = node.inputs[0];
      if (!g.wants_grad(in)) return;
      // Subgradient at exactly zero is zero.
      g.grad_slot(in).vec().array() +=
          (g.nodes_[in].value.vec().array() > Scalar(0)).select(node.grad.vec().array(), Scalar(0));
    });
  }
  TensorT out(x.shape(), (Scalar(1) / (Scalar(1) + (-x.vec().array()).exp())).matrix());
  return push(OpKind::Sigmoid, {input.id}, std::move(out), [](Graph& g, std::size_t self) {
    const Node& node = g.nodes_[self];
    const std::size_t in = node.inputs[0];
    if (!g.wants_grad(in)) return;
    const auto y = node.value.vec().array();
    g.grad_slot(in).vec().array() += node.grad.vec().array() * y * (Scalar(1) - y);
  });
}

template <typename Scalar>
Var Graph<Scalar>::softmax_channels(Var logits) {
  check(logits);
  TensorT out = kernels::softmax_channels(value(logits));
  return push(OpKind::SoftmaxChannels, {logits.id}, std::move(out),
              [](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t in = node.inputs[0];
                if (!g.wants_grad(in)) return;
                g.grad_slot(in).vec() +=
                    kernels::softmax_channels_backward(node.value, node.grad).vec();
              });
}

template <typename Scalar>
Var Graph<Scalar>::concat_channels(Var a, Var b) {
  check(a);
  check(b);
  TensorT out = kernels::concat_channels(value(a), value(b));
  return push(OpKind::ConcatChannels, {a.id, b.id}, std::move(out),
              [](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t ia = node.inputs[0], ib = node.inputs[1];
                const Index ca = g.nodes_[ia].value.dim(1), cb = g.nodes_[ib].value.dim(1);
                if (g.wants_grad(ia)) g.grad_slot(ia).vec() += slice_channels(node.grad, 0, ca).vec();
                if (g.wants_grad(ib)) g.grad_slot(ib).vec() += slice_channels(node.grad, ca, cb).vec();
              });
}

template <typename Scalar>
Var Graph<Scalar>::mul(Var a, Var b) {
  check(a);
  check(b);
  TensorT out = kernels::mul_broadcast(value(a), value(b));
  return push(OpKind::Mul, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t self) {
    const Node& node = g.nodes_[self];
    const std::size_t ia = node.inputs[0], ib = node.inputs[1];
    const TensorT& va = g.nodes_[ia].value;
    const TensorT& vb = g.nodes_[ib].value;
    if (g.wants_grad(ia)) g.grad_slot(ia).vec() += kernels::mul_broadcast(node.grad, vb).vec();
    if (!g.wants_grad(ib)) return;
    TensorT& db = g.grad_slot(ib);
    if (va.shape() == vb.shape()) {
      db.vec() += node.grad.vec().cwiseProduct(va.vec());
      return;
    }
    // Broadcast gate: reduce over a's channels.
    const Index n = va.dim(0), c = va.dim(1), plane = va.dim(2) * va.dim(3);
    for (Index i = 0; i < n; ++i) {
      auto dst = db.vec().segment(i * plane, plane);
      for (Index k = 0; k < c; ++k) {
        const Index off = (i * c + k) * plane;
        dst += node.grad.vec().segment(off, plane).cwiseProduct(va.vec().segment(off, plane));
      }
    }
  });
}

template <typename Scalar>
Var Graph<Scalar>::add(Var a, Var b) {
  check(a);
  check(b);
  require_same_shape(value(a), value(b), "add");
  TensorT out(value(a).shape(), value(a).vec() + value(b).vec());
  return push(OpKind::Add, {a.id, b.id}, std::move(out), [](Graph& g, std::size_t self) {
    const Node& node = g.nodes_[self];
    for (std::size_t in : node.inputs) {
      if (g.wants_grad(in)) g.grad_slot(in).vec() += node.grad.vec();
    }
  });
}

template <typename Scalar>
Var Graph<Scalar>::sum(Var input) {
  check(input);
  const Scalar total = static_cast<Scalar>(value(input).vec().template cast<double>().sum());
  return push(OpKind::Sum, {input.id}, TensorT::scalar(total), [](Graph& g, std::size_t self) {
    const Node& node = g.nodes_[self];
    const std::size_t in = node.inputs[0];
    if (g.wants_grad(in)) g.grad_slot(in).vec().array() += node.grad[0];
  });
}

template <typename Scalar>
Var Graph<Scalar>::affine(Var input, Scalar scale, Scalar shift) {
  check(input);
  TensorT out(value(input).shape(), (value(input).vec().array() * scale + shift).matrix());
  return push(OpKind::Affine, {input.id}, std::move(out),
              [scale](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t in = node.inputs[0];
                if (g.wants_grad(in)) g.grad_slot(in).vec() += scale * node.grad.vec();
              });
}

template <typename Scalar>
Var Graph<Scalar>::cross_entropy(Var probs, Var target) {
  check(probs);
  check(target);
  const TensorT& p = value(probs);
  const TensorT& t = value(target);
  require_same_shape(p, t, "cross_entropy");
  require_rank4(p, "cross_entropy probabilities");
  const double pixels = static_cast<double>(p.dim(0) * p.dim(2) * p.dim(3));
  double total = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (t[i] != Scalar(0)) total -= static_cast<double>(t[i]) * std::log(static_cast<double>(p[i]) + kLogClamp);
  }
  return push(OpKind::CrossEntropy, {probs.id, target.id},
              TensorT::scalar(static_cast<Scalar>(total / pixels)),
              [pixels](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t ip = node.inputs[0], it = node.inputs[1];
                const TensorT& pv = g.nodes_[ip].value;
                const TensorT& tv = g.nodes_[it].value;
                const double upstream = node.grad[0];
                if (g.wants_grad(ip)) {
                  TensorT& dp = g.grad_slot(ip);
                  for (Index i = 0; i < pv.size(); ++i) {
                    dp[i] += static_cast<Scalar>(-upstream * tv[i] /
                                                 ((static_cast<double>(pv[i]) + kLogClamp) * pixels));
                  }
                }
                if (g.wants_grad(it)) {
                  TensorT& dt = g.grad_slot(it);
                  for (Index i = 0; i < pv.size(); ++i) {
                    dt[i] += static_cast<Scalar>(
                        -upstream * std::log(static_cast<double>(pv[i]) + kLogClamp) / pixels);
                  }
                }
              });
}

template <typename Scalar>
Var Graph<Scalar>::soft_dice(Var probs, Var target, double epsilon) {
  check(probs);
  check(target);
  const TensorT& p = value(probs);
  const TensorT& t = value(target);
  require_same_shape(p, t, "soft_dice");
  const auto pd = p.vec().template cast<double>();
  const auto td = t.vec().template cast<double>();
  const double inter = pd.dot(td);
  const double denom = pd.sum() + td.sum() + epsilon;
  const double numer = 2.0 * inter + epsilon;
  return push(OpKind::SoftDice, {probs.id, target.id},
              TensorT::scalar(static_cast<Scalar>(numer / denom)),
              [numer, denom](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t ip = node.inputs[0], it = node.inputs[1];
                const double upstream = node.grad[0];
                const double d2 = denom * denom;
                // d/dp_i = (2 t_i denom - numer) / denom^2, symmetric in t.
                if (g.wants_grad(ip)) {
                  const auto& tv = g.nodes_[it].value.vec();
                  g.grad_slot(ip).vec() +=
                      ((tv.template cast<double>().array() * (2.0 * denom) - numer) *
                       (upstream / d2)).matrix().template cast<Scalar>();
                }
                if (g.wants_grad(it)) {
                  const auto& pv = g.nodes_[ip].value.vec();
                  g.grad_slot(it).vec() +=
                      ((pv.template cast<double>().array() * (2.0 * denom) - numer) *
                       (upstream / d2)).matrix().template cast<Scalar>();
                }
              });
}

template <typename Scalar>
Var Graph<Scalar>::mean_class_dice(Var probs, Var target, double epsilon) {
  check(probs);
  check(target);
  const TensorT& p = value(probs);
  const TensorT& t = value(target);
  require_same_shape(p, t, "mean_class_dice");
  require_rank4(p, "mean_class_dice probabilities");
  const Index n = p.dim(0), c = p.dim(1), plane = p.dim(2) * p.dim(3);
  std::vector<double> numer(static_cast<std::size_t>(c)), denom(static_cast<std::size_t>(c));
  double mean = 0;
  for (Index k = 0; k < c; ++k) {
    double inter = 0, sp = 0, st = 0;
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + k) * plane;
      const auto pk = p.vec().segment(off, plane).template cast<double>();
      const auto tk = t.vec().segment(off, plane).template cast<double>();
      inter += pk.dot(tk);
      sp += pk.sum();
      st += tk.sum();
    }
    numer[static_cast<std::size_t>(k)] = 2.0 * inter + epsilon;
    denom[static_cast<std::size_t>(k)] = sp + st + epsilon;
    mean += numer[static_cast<std::size_t>(k)] / denom[static_cast<std::size_t>(k)];
  }
  mean /= static_cast<double>(c);
  return push(OpKind::MeanClassDice, {probs.id, target.id},
              TensorT::scalar(static_cast<Scalar>(mean)),
              [numer, denom](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t ip = node.inputs[0], it = node.inputs[1];
                const TensorT& pv = g.nodes_[ip].value;
                const TensorT& tv = g.nodes_[it].value;
                const Index n = pv.dim(0), c = pv.dim(1), plane = pv.dim(2) * pv.dim(3);
                const double upstream = node.grad[0] / static_cast<double>(c);
                for (int side = 0; side < 2; ++side) {
                  const std::size_t dst_id = side == 0 ? ip : it;
                  if (!g.wants_grad(dst_id)) continue;
                  const TensorT& other = side == 0 ? tv : pv;
                  TensorT& dst = g.grad_slot(dst_id);
                  for (Index k = 0; k < c; ++k) {
                    const double num = numer[static_cast<std::size_t>(k)];
                    const double den = denom[static_cast<std::size_t>(k)];
                    const double scale = upstream / (den * den);
                    for (Index i = 0; i < n; ++i) {
                      const Index off = (i * c + k) * plane;
                      for (Index q = 0; q < plane; ++q) {
                        dst[off + q] += static_cast<Scalar>(
                            (2.0 * static_cast<double>(other[off + q]) * den - num) * scale);
                      }
                    }
                  }
                }
              });
}

template <typename Scalar>
Var Graph<Scalar>::channel_score(Var input, const std::vector<int>& channels,
                                 const TensorT* pixel_mask) {
  check(input);
  const TensorT& x = value(input);
  require_rank4(x, "channel_score input");
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (int ch : channels) {
    if (ch < 0 || ch >= c) {
      throw ContractError("channel_score: channel " + std::to_string(ch) + " outside [0," +
                          std::to_string(c) + ")");
    }
  }
  if (pixel_mask && pixel_mask->shape() != Shape{n, 1, x.dim(2), x.dim(3)}) {
    throw ShapeError("channel_score mask " + shape_string(pixel_mask->shape()) +
                     " does not match " + shape_string(x.shape()));
  }
  // Weight per element: 1 for selected channels (and masked-in pixels), else 0.
  TensorT weight(x.shape());
  for (Index i = 0; i < n; ++i) {
    for (int ch : channels) {
      auto dst = weight.vec().segment((i * c + ch) * plane, plane);
      if (pixel_mask) {
        dst += pixel_mask->vec().segment(i * plane, plane);
      } else {
        dst.array() += Scalar(1);
      }
    }
  }
  const double score =
      x.vec().template cast<double>().dot(weight.vec().template cast<double>());
  return push(OpKind::ChannelScore, {input.id}, TensorT::scalar(static_cast<Scalar>(score)),
              [weight = std::move(weight)](Graph& g, std::size_t self) {
                const Node& node = g.nodes_[self];
                const std::size_t in = node.inputs[0];
                if (g.wants_grad(in)) g.grad_slot(in).vec() += node.grad[0] * weight.vec();
              });
}

template <typename Scalar>
void Graph<Scalar>::backward(Var loss) {
  check(loss);
  if (value(loss).size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(value(loss).shape()));
  }
  for (Node& node : nodes_) node.grad = TensorT();
  grad_slot(loss.id)[0] = Scalar(1);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty() || !node.backward || !node.requires_grad) continue;
    node.backward(*this, id);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) grad_slot(id);
}

template class Graph<float>;
template class Graph<double>;

}  // namespace aunet
