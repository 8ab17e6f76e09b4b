#ifndef AUNET_TENSOR_HPP
#define AUNET_TENSOR_HPP

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aunet {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised when operand extents are incompatible. The message names every shape involved.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a documented precondition that is not about shapes is violated.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);
Index shape_size(const Shape& shape);

/// Dense row-major N-dimensional array backed by an Eigen column vector.
///
/// Images and feature maps use the layout batch x channels x height x width,
/// convolution kernels use out x in x kH x kW. Every extent is at least one.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_ = Vector::Zero(shape_size(shape_));
  }

  Tensor(std::initializer_list<Index> shape) : Tensor(Shape(shape)) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + shape_string(shape_) + " holds " +
                       std::to_string(shape_size(shape_)) + " elements but " +
                       std::to_string(data_.size()) + " were supplied");
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static Tensor scalar(Scalar value) { return constant({1}, value); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }

  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset4(n, c, h, w)]; }
  Scalar operator()(Index n, Index c, Index h, Index w) const {
    return data_[offset4(n, c, h, w)];
  }

  Scalar item() const {
    if (data_.size() != 1) {
      throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape_));
    }
    return data_[0];
  }

  /// Same elements viewed under a different shape of equal size.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, data_.template cast<To>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void validate_shape(const Shape& shape) {
    for (Index e : shape) {
      if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
    }
  }

  Index offset4(Index n, Index c, Index h, Index w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  Shape shape_;
  Vector data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Integer label map, [N,H,W] or [H,W], values are class indices.
using LabelMap = Tensor<std::int32_t>;

/// Throws ShapeError unless `t` has rank 4.
template <typename Scalar>
void require_rank4(const Tensor<Scalar>& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be rank 4 (N,C,H,W), got " +
                     shape_string(t.shape()));
  }
}

/// Channel block [begin, begin+count) of a rank-4 tensor.
template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& t, Index begin, Index count) {
  require_rank4(t, "slice_channels input");
  const Index n = t.dim(0), c = t.dim(1), plane = t.dim(2) * t.dim(3);
  if (begin < 0 || count < 1 || begin + count > c) {
    throw ShapeError("channel range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") outside " + shape_string(t.shape()));
  }
  Tensor<Scalar> out({n, count, t.dim(2), t.dim(3)});
  for (Index i = 0; i < n; ++i) {
    out.vec().segment(i * count * plane, count * plane) =
        t.vec().segment((i * c + begin) * plane, count * plane);
  }
  return out;
}

/// Inner product of two equally shaped tensors, accumulated in double.
template <typename Scalar>
double dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("dot of " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  return a.vec().template cast<double>().dot(b.vec().template cast<double>());
}

}  // namespace aunet

#endif  // AUNET_TENSOR_HPP
