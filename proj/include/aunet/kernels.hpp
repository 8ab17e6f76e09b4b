#ifndef AUNET_KERNELS_HPP
#define AUNET_KERNELS_HPP

// Forward and adjoint kernels for the layer types of the segmentation network.
// These operate on plain tensors; the autodiff graph in graph.hpp records them.

#include "aunet/tensor.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace aunet::kernels {

enum class Padding { Same, Valid };

/// Stride-1 cross-correlation. kernel is [Cout,Cin,kH,kW]; bias, when present, is [Cout].
/// Same padding zero-pads (k-1)/2 before and the remainder after each spatial axis.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      const Tensor<Scalar>* bias, Padding padding);

/// Accumulates (+=) the gradients of conv2d into the non-null outputs, which must be
/// preallocated with the shapes of input, kernel and bias.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                     const Tensor<Scalar>& grad_output, Padding padding,
                     Tensor<Scalar>* grad_input, Tensor<Scalar>* grad_kernel,
                     Tensor<Scalar>* grad_bias);

/// 2x2 stride-2 transposed convolution. kernel is [Cin,Cout,2,2]; output is [N,Cout,2H,2W].
template <typename Scalar>
Tensor<Scalar> conv_transpose2x2(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                                 const Tensor<Scalar>* bias);

template <typename Scalar>
void conv_transpose2x2_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                                const Tensor<Scalar>& grad_output, Tensor<Scalar>* grad_input,
                                Tensor<Scalar>* grad_kernel, Tensor<Scalar>* grad_bias);

/// 2x2 stride-2 max pooling. `argmax` receives, per output element, the flat input index
/// that won; ties go to the first element in row-major window order.
template <typename Scalar>
Tensor<Scalar> maxpool2x2(const Tensor<Scalar>& input, std::vector<std::int64_t>* argmax);

/// Per-pixel softmax across the channel axis of [N,C,H,W].
template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& logits);

/// Vector-Jacobian product of softmax_channels given its output.
template <typename Scalar>
Tensor<Scalar> softmax_channels_backward(const Tensor<Scalar>& probs,
                                         const Tensor<Scalar>& grad_output);

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Hadamard product; `b` may also be [N,1,H,W] and is then broadcast over a's channels.
template <typename Scalar>
Tensor<Scalar> mul_broadcast(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Per-pixel argmax over channels of [N,C,H,W], lowest index on ties. Returns [N,H,W].
template <typename Scalar>
LabelMap argmax_channels(const Tensor<Scalar>& probs);

}  // namespace aunet::kernels

#endif  // AUNET_KERNELS_HPP
