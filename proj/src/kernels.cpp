#include "aunet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aunet::kernels {
namespace {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ConvGeometry {
  Index n, cin, h, w;
  Index cout, kh, kw;
  Index pad_top, pad_left;
  Index out_h, out_w;

  Index patch() const { return cin * kh * kw; }
  Index out_plane() const { return out_h * out_w; }
  bool pointwise() const { return kh == 1 && kw == 1; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                           Padding padding) {
  require_rank4(input, "conv2d input");
  require_rank4(kernel, "conv2d kernel");
  if (kernel.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d kernel " + shape_string(kernel.shape()) +
                     " does not match input channels of " + shape_string(input.shape()));
  }
  ConvGeometry g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  if (padding == Padding::Same) {
    g.pad_top = (g.kh - 1) / 2;
    g.pad_left = (g.kw - 1) / 2;
    g.out_h = g.h;
    g.out_w = g.w;
  } else {
    if (g.kh > g.h || g.kw > g.w) {
      throw ShapeError("conv2d valid padding: kernel " + shape_string(kernel.shape()) +
                       " larger than input " + shape_string(input.shape()));
    }
    g.pad_top = 0;
    g.pad_left = 0;
    g.out_h = g.h - g.kh + 1;
    g.out_w = g.w - g.kw + 1;
  }
  return g;
}

template <typename Scalar>
void check_bias(const Tensor<Scalar>* bias, Index channels, const char* op) {
  if (bias && (bias->rank() != 1 || bias->dim(0) != channels)) {
    throw ShapeError(std::string(op) + " bias " + shape_string(bias->shape()) +
                     " does not match " + std::to_string(channels) + " output channels");
  }
}

// Unfolds one sample into a (cin*kh*kw) x (out_h*out_w) row-major patch matrix.
template <typename Scalar>
void im2col(const ConvGeometry& g, const Scalar* x, Scalar* col) {
  const Index plane = g.out_plane();
  for (Index c = 0; c < g.cin; ++c) {
    const Scalar* xc = x + c * g.h * g.w;
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        Scalar* row = col + ((c * g.kh + a) * g.kw + b) * plane;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy + a - g.pad_top;
          Scalar* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.out_w, Scalar(0));
            continue;
          }
          const Scalar* src = xc + iy * g.w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox + b - g.pad_left;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const ConvGeometry& g, const Scalar* col, Scalar* dx) {
  const Index plane = g.out_plane();
  for (Index c = 0; c < g.cin; ++c) {
    Scalar* dxc = dx + c * g.h * g.w;
    for (Index a = 0; a < g.kh; ++a) {
      for (Index b = 0; b < g.kw; ++b) {
        const Scalar* row = col + ((c * g.kh + a) * g.kw + b) * plane;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy + a - g.pad_top;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* src = row + oy * g.out_w;
          Scalar* dst = dxc + iy * g.w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox + b - g.pad_left;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void require_same_nhw(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != 4 || b.size() != 4 || a[0] != b[0] || a[2] != b[2] || a[3] != b[3]) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                     shape_string(b));
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      const Tensor<Scalar>* bias, Padding padding) {
  const ConvGeometry g = conv_geometry(input, kernel, padding);
  check_bias(bias, g.cout, "conv2d");
  Tensor<Scalar> out({g.n, g.cout, g.out_h, g.out_w});
  const Eigen::Map<const RowMat<Scalar>> k(kernel.data(), g.cout, g.patch());
  const bool direct = g.pointwise();
  RowMat<Scalar> col(direct ? 0 : g.patch(), direct ? 0 : g.out_plane());
  for (Index i = 0; i < g.n; ++i) {
    const Scalar* x = input.data() + i * g.cin * g.h * g.w;
    Eigen::Map<RowMat<Scalar>> y(out.data() + i * g.cout * g.out_plane(), g.cout,
                                 g.out_plane());
    if (direct) {
      y.noalias() = k * Eigen::Map<const RowMat<Scalar>>(x, g.cin, g.out_plane());
    } else {
      im2col(g, x, col.data());
      y.noalias() = k * col;
    }
    if (bias) y.colwise() += bias->vec();
  }
  return out;
}

template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                     const Tensor<Scalar>& grad_output, Padding padding,
                     Tensor<Scalar>* grad_input, Tensor<Scalar>* grad_kernel,
                     Tensor<Scalar>* grad_bias) {
  const ConvGeometry g = conv_geometry(input, kernel, padding);
  if (grad_output.shape() != Shape{g.n, g.cout, g.out_h, g.out_w}) {
    throw ShapeError("conv2d backward: gradient " + shape_string(grad_output.shape()) +
                     " does not match output of " + shape_string(input.shape()) + " * " +
                     shape_string(kernel.shape()));
  }
  const Eigen::Map<const RowMat<Scalar>> k(kernel.data(), g.cout, g.patch());
  const bool direct = g.pointwise();
  RowMat<Scalar> col(direct ? 0 : g.patch(), direct ? 0 : g.out_plane());
  RowMat<Scalar> dcol;
  for (Index i = 0; i < g.n; ++i) {
    const Scalar* x = input.data() + i * g.cin * g.h * g.w;
    const Eigen::Map<const RowMat<Scalar>> dy(grad_output.data() + i * g.cout * g.out_plane(),
                                              g.cout, g.out_plane());
    if (grad_bias) grad_bias->vec().noalias() += dy.rowwise().sum();
    if (grad_kernel) {
      Eigen::Map<RowMat<Scalar>> dk(grad_kernel->data(), g.cout, g.patch());
      if (direct) {
        dk.noalias() += dy * Eigen::Map<const RowMat<Scalar>>(x, g.cin, g.out_plane()).transpose();
      } else {
        im2col(g, x, col.data());
        dk.noalias() += dy * col.transpose();
      }
    }
    if (grad_input) {
      Scalar* dx = grad_input->data() + i * g.cin * g.h * g.w;
      if (direct) {
        Eigen::Map<RowMat<Scalar>>(dx, g.cin, g.out_plane()).noalias() += k.transpose() * dy;
      } else {
        dcol.noalias() = k.transpose() * dy;
        col2im_add(g, dcol.data(), dx);
      }
    }
  }
}

template <typename Scalar>
Tensor<Scalar> conv_transpose2x2(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                                 const Tensor<Scalar>* bias) {
  require_rank4(input, "conv_transpose2x2 input");
  require_rank4(kernel, "conv_transpose2x2 kernel");
  if (kernel.dim(0) != input.dim(1) || kernel.dim(2) != 2 || kernel.dim(3) != 2) {
    throw ShapeError("conv_transpose2x2 kernel " + shape_string(kernel.shape()) +
                     " incompatible with input " + shape_string(input.shape()));
  }
  const Index n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index cout = kernel.dim(1);
  check_bias(bias, cout, "conv_transpose2x2");
  Tensor<Scalar> out({n, cout, 2 * h, 2 * w});
  const Eigen::Map<const RowMat<Scalar>> k(kernel.data(), cin, cout * 4);
  RowMat<Scalar> z(cout * 4, h * w);
  for (Index i = 0; i < n; ++i) {
    const Eigen::Map<const RowMat<Scalar>> x(input.data() + i * cin * h * w, cin, h * w);
    z.noalias() = k.transpose() * x;
    for (Index co = 0; co < cout; ++co) {
      const Scalar b = bias ? (*bias)[co] : Scalar(0);
      Scalar* y = out.data() + (i * cout + co) * 4 * h * w;
      for (Index a = 0; a < 2; ++a) {
        for (Index c = 0; c < 2; ++c) {
          const Scalar* zr = z.data() + (co * 4 + a * 2 + c) * h * w;
          for (Index yy = 0; yy < h; ++yy) {
            Scalar* dst = y + (2 * yy + a) * 2 * w + c;
            const Scalar* src = zr + yy * w;
            for (Index xx = 0; xx < w; ++xx) dst[2 * xx] = src[xx] + b;
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
void conv_transpose2x2_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                                const Tensor<Scalar>& grad_output, Tensor<Scalar>* grad_input,
                                Tensor<Scalar>* grad_kernel, Tensor<Scalar>* grad_bias) {
  const Index n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index cout = kernel.dim(1);
  if (grad_output.shape() != Shape{n, cout, 2 * h, 2 * w}) {
    throw ShapeError("conv_transpose2x2 backward: gradient " +
                     shape_string(grad_output.shape()) + " does not match input " +
                     shape_string(input.shape()));
  }
  const Eigen::Map<const RowMat<Scalar>> k(kernel.data(), cin, cout * 4);
  RowMat<Scalar> dz(cout * 4, h * w);
  for (Index i = 0; i < n; ++i) {
    for (Index co = 0; co < cout; ++co) {
      const Scalar* dy = grad_output.data() + (i * cout + co) * 4 * h * w;
      if (grad_bias) {
        (*grad_bias)[co] += Eigen::Map<const ColVec<Scalar>>(dy, 4 * h * w).sum();
      }
      for (Index a = 0; a < 2; ++a) {
        for (Index c = 0; c < 2; ++c) {
          Scalar* zr = dz.data() + (co * 4 + a * 2 + c) * h * w;
          for (Index yy = 0; yy < h; ++yy) {
            const Scalar* src = dy + (2 * yy + a) * 2 * w + c;
            Scalar* dst = zr + yy * w;
            for (Index xx = 0; xx < w; ++xx) dst[xx] = src[2 * xx];
          }
        }
      }
    }
    const Eigen::Map<const RowMat<Scalar>> x(input.data() + i * cin * h * w, cin, h * w);
    if (grad_kernel) {
      Eigen::Map<RowMat<Scalar>>(grad_kernel->data(), cin, cout * 4).noalias() +=
          x * dz.transpose();
    }
    if (grad_input) {
      Eigen::Map<RowMat<Scalar>>(grad_input->data() + i * cin * h * w, cin, h * w).noalias() +=
          k * dz;
    }
  }
}

template <typename Scalar>
Tensor<Scalar> maxpool2x2(const Tensor<Scalar>& input, std::vector<std::int64_t>* argmax) {
  require_rank4(input, "maxpool2x2 input");
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2 requires even height and width, got " +
                     shape_string(input.shape()));
  }
  const Index oh = h / 2, ow = w / 2;
  Tensor<Scalar> out({n, c, oh, ow});
  if (argmax) argmax->assign(static_cast<std::size_t>(out.size()), 0);
  Index o = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Index base = plane * h * w;
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x, ++o) {
        const Index candidates[4] = {base + 2 * y * w + 2 * x, base + 2 * y * w + 2 * x + 1,
                                     base + (2 * y + 1) * w + 2 * x,
                                     base + (2 * y + 1) * w + 2 * x + 1};
        Index best = candidates[0];
        for (int k = 1; k < 4; ++k) {
          if (input[candidates[k]] > input[best]) best = candidates[k];
        }
        out[o] = input[best];
        if (argmax) (*argmax)[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& logits) {
  require_rank4(logits, "softmax_channels input");
  const Index n = logits.dim(0), c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  if (c < 2) {
    throw ShapeError("softmax_channels needs at least 2 channels, got " +
                     shape_string(logits.shape()));
  }
  Tensor<Scalar> out(logits.shape());
  for (Index i = 0; i < n; ++i) {
    const Scalar* x = logits.data() + i * c * plane;
    Scalar* y = out.data() + i * c * plane;
    for (Index p = 0; p < plane; ++p) {
      Scalar m = x[p];
      for (Index k = 1; k < c; ++k) m = std::max(m, x[k * plane + p]);
      Scalar total = 0;
      for (Index k = 0; k < c; ++k) {
        const Scalar e = std::exp(x[k * plane + p] - m);
        y[k * plane + p] = e;
        total += e;
      }
      for (Index k = 0; k < c; ++k) y[k * plane + p] /= total;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> softmax_channels_backward(const Tensor<Scalar>& probs,
                                         const Tensor<Scalar>& grad_output) {
  const Index n = probs.dim(0), c = probs.dim(1), plane = probs.dim(2) * probs.dim(3);
  Tensor<Scalar> dx(probs.shape());
  for (Index i = 0; i < n; ++i) {
    const Scalar* p = probs.data() + i * c * plane;
    const Scalar* g = grad_output.data() + i * c * plane;
    Scalar* d = dx.data() + i * c * plane;
    for (Index q = 0; q < plane; ++q) {
      Scalar inner = 0;
      for (Index k = 0; k < c; ++k) inner += p[k * plane + q] * g[k * plane + q];
      for (Index k = 0; k < c; ++k) d[k * plane + q] = p[k * plane + q] * (g[k * plane + q] - inner);
    }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_nhw(a.shape(), b.shape(), "concat_channels");
  const Index n = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  Tensor<Scalar> out({n, ca + cb, a.dim(2), a.dim(3)});
  for (Index i = 0; i < n; ++i) {
    out.vec().segment(i * (ca + cb) * plane, ca * plane) =
        a.vec().segment(i * ca * plane, ca * plane);
    out.vec().segment((i * (ca + cb) + ca) * plane, cb * plane) =
        b.vec().segment(i * cb * plane, cb * plane);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mul_broadcast(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() == b.shape()) {
    return Tensor<Scalar>(a.shape(), a.vec().cwiseProduct(b.vec()));
  }
  if (a.rank() == 4 && b.rank() == 4 && b.dim(1) == 1 && a.dim(0) == b.dim(0) &&
      a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3)) {
    const Index n = a.dim(0), c = a.dim(1), plane = a.dim(2) * a.dim(3);
    Tensor<Scalar> out(a.shape());
    for (Index i = 0; i < n; ++i) {
      const auto gate = b.vec().segment(i * plane, plane);
      for (Index k = 0; k < c; ++k) {
        const Index off = (i * c + k) * plane;
        out.vec().segment(off, plane) = a.vec().segment(off, plane).cwiseProduct(gate);
      }
    }
    return out;
  }
  throw ShapeError("mul: cannot broadcast " + shape_string(b.shape()) + " over " +
                   shape_string(a.shape()));
}

template <typename Scalar>
LabelMap argmax_channels(const Tensor<Scalar>& probs) {
  require_rank4(probs, "argmax_channels input");
  const Index n = probs.dim(0), c = probs.dim(1), plane = probs.dim(2) * probs.dim(3);
  LabelMap out({n, probs.dim(2), probs.dim(3)});
  for (Index i = 0; i < n; ++i) {
    const Scalar* p = probs.data() + i * c * plane;
    for (Index q = 0; q < plane; ++q) {
      std::int32_t best = 0;
      for (Index k = 1; k < c; ++k) {
        if (p[k * plane + q] > p[best * plane + q]) best = static_cast<std::int32_t>(k);
      }
      out[i * plane + q] = best;
    }
  }
  return out;
}

#define AUNET_INSTANTIATE_KERNELS(T)                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, Padding); \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                Padding, Tensor<T>*, Tensor<T>*, Tensor<T>*);                \
  template Tensor<T> conv_transpose2x2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*); \
  template void conv_transpose2x2_backward(const Tensor<T>&, const Tensor<T>&,              \
                                           const Tensor<T>&, Tensor<T>*, Tensor<T>*,         \
                                           Tensor<T>*);                                      \
  template Tensor<T> maxpool2x2(const Tensor<T>&, std::vector<std::int64_t>*);               \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                     \
  template Tensor<T> softmax_channels_backward(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> mul_broadcast(const Tensor<T>&, const Tensor<T>&);                      \
  template LabelMap argmax_channels(const Tensor<T>&);

AUNET_INSTANTIATE_KERNELS(float)
AUNET_INSTANTIATE_KERNELS(double)

#undef AUNET_INSTANTIATE_KERNELS

}  // namespace aunet::kernels
