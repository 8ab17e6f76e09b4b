#ifndef AUNET_TESTS_SUPPORT_HPP
#define AUNET_TESTS_SUPPORT_HPP

#include "aunet/gradcheck.hpp"
#include "aunet/graph.hpp"
#include "aunet/losses.hpp"
#include "aunet/model.hpp"
#include "aunet/tensor.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

namespace aunet::testing {

inline TensorD random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  TensorD t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// Random values kept at least `gap` away from zero, for checks near a kink.
inline TensorD random_away_from_zero(const Shape& shape, std::mt19937_64& rng, double gap = 0.1) {
  TensorD t = random_tensor(shape, rng, gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (Index i = 0; i < t.size(); ++i) {
    if (sign(rng)) t[i] = -t[i];
  }
  return t;
}

/// One-hot [N,C,H,W] from random labels.
inline TensorD random_one_hot(Index n, Index c, Index h, Index w, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> pick(0, c - 1);
  TensorD t({n, c, h, w});
  for (Index i = 0; i < n; ++i) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) t(i, pick(rng), y, x) = 1.0;
    }
  }
  return t;
}

using ScalarBuilder = std::function<Var(Graph<double>&, Var)>;

/// Finite-difference check of d(build(x))/dx, where build maps a variable leaf to a
/// scalar node of the same graph.
inline double graph_gradient_error(const ScalarBuilder& build, const TensorD& point,
                                   double h = 1e-5) {
  DifferentiableFunction f;
  f.value = [&](const TensorD& x) {
    Graph<double> g;
    return g.value(build(g, g.variable(x))).item();
  };
  f.gradient = [&](const TensorD& x) {
    Graph<double> g;
    Var v = g.variable(x);
    g.backward(build(g, v));
    return g.grad(v);
  };
  return finite_difference_check(f, point, h);
}

/// All parameters concatenated in creation order.
inline TensorD flatten(const ParameterSet<double>& params) {
  TensorD flat({params.element_count()});
  Index at = 0;
  for (const auto& e : params) {
    flat.vec().segment(at, e.value.size()) = e.value.vec();
    at += e.value.size();
  }
  return flat;
}

inline void unflatten(const TensorD& flat, ParameterSet<double>& params) {
  Index at = 0;
  for (auto& e : params) {
    e.value.vec() = flat.vec().segment(at, e.value.size());
    at += e.value.size();
  }
}

/// Finite-difference check of the training loss with respect to every model parameter,
/// as a norm-wise relative error.
inline double model_gradient_error(const AttentionUNet<double>& model, const TensorD& input,
                                   const TensorD& target, LossKind kind, double h = 1e-5) {
  auto loss_of = [&](const AttentionUNet<double>& m, ParameterSet<double>* grads) {
    Graph<double> g;
    BoundModel<double> bound(g, m);
    const ForwardOutput out = forward(bound, g.constant(input));
    Var loss = loss_node(g, out.probs, g.constant(target), kind);
    if (grads) {
      g.backward(loss);
      *grads = bound.gradients();
    }
    return g.value(loss).item();
  };
  DifferentiableFunction f;
  f.value = [&](const TensorD& flat) {
    AttentionUNet<double> m = model;
    unflatten(flat, m.params);
    return loss_of(m, nullptr);
  };
  f.gradient = [&](const TensorD& flat) {
    AttentionUNet<double> m = model;
    unflatten(flat, m.params);
    ParameterSet<double> grads;
    loss_of(m, &grads);
    return flatten(grads);
  };
  return finite_difference_norm_check(f, flatten(model.params), h);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "aunet") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace aunet::testing

#endif  // AUNET_TESTS_SUPPORT_HPP
