#include "aunet/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace aunet {

std::vector<Index> window_indices(Index depth, const SliceWindow& window) {
  if (window.start < 0 || window.count < 1 || window.start + window.count > depth) {
    throw RangeError("slice window [" + std::to_string(window.start) + "," +
                     std::to_string(window.start + window.count) + ") exceeds volume depth " +
                     std::to_string(depth));
  }
  std::vector<Index> z(static_cast<std::size_t>(window.count));
  for (Index i = 0; i < window.count; ++i) z[static_cast<std::size_t>(i)] = window.start + i;
  return z;
}

Image axial_slice(const Volume& volume, Index z) {
  const Index nx = volume.dims[0], ny = volume.dims[1];
  if (z < 0 || z >= volume.dims[2]) {
    throw RangeError("slice " + std::to_string(z) + " outside depth " +
                     std::to_string(volume.dims[2]));
  }
  // x-fastest storage means one z plane is a row-major (y, x) block.
  return Eigen::Map<const Image>(volume.voxels.data() + z * nx * ny, ny, nx);
}

LabelImage axial_labels(const Volume& volume, Index z) {
  return axial_slice(volume, z).round().cast<std::int32_t>();
}

namespace {

struct Sample {
  Index lo, hi;
  double frac;
};

Sample source_coordinate(Index i, Index in, Index out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in - 1));
  const Index lo = static_cast<Index>(std::floor(s));
  const Index hi = std::min(lo + 1, in - 1);
  return {lo, hi, s - static_cast<double>(lo)};
}

Index nearest_index(Index i, Index in, Index out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
  const Index idx = static_cast<Index>(std::ceil(s - 0.5));
  return std::clamp<Index>(idx, 0, in - 1);
}

}  // namespace

template <typename Scalar>
ImageOf<Scalar> resize_bilinear(const ImageOf<Scalar>& image, Index rows, Index cols) {
  if (image.rows() < 1 || image.cols() < 1 || rows < 1 || cols < 1) {
    throw ShapeError("resize: empty image or target");
  }
  if (image.rows() == rows && image.cols() == cols) return image;
  std::vector<Sample> ys(static_cast<std::size_t>(rows)), xs(static_cast<std::size_t>(cols));
  for (Index r = 0; r < rows; ++r) ys[static_cast<std::size_t>(r)] = source_coordinate(r, image.rows(), rows);
  for (Index c = 0; c < cols; ++c) xs[static_cast<std::size_t>(c)] = source_coordinate(c, image.cols(), cols);
  ImageOf<Scalar> out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Sample& y = ys[static_cast<std::size_t>(r)];
    const Scalar fy = static_cast<Scalar>(y.frac);
    for (Index c = 0; c < cols; ++c) {
      const Sample& x = xs[static_cast<std::size_t>(c)];
      const Scalar fx = static_cast<Scalar>(x.frac);
      // a + (b - a) * t keeps constant regions exactly constant.
      const Scalar top = image(y.lo, x.lo) + (image(y.lo, x.hi) - image(y.lo, x.lo)) * fx;
      const Scalar bottom = image(y.hi, x.lo) + (image(y.hi, x.hi) - image(y.hi, x.lo)) * fx;
      out(r, c) = top + (bottom - top) * fy;
    }
  }
  return out;
}

template ImageOf<float> resize_bilinear<float>(const ImageOf<float>&, Index, Index);
template ImageOf<double> resize_bilinear<double>(const ImageOf<double>&, Index, Index);

LabelImage resize_mask(const LabelImage& mask, Index rows, Index cols) {
  if (mask.rows() < 1 || mask.cols() < 1 || rows < 1 || cols < 1) {
    throw ShapeError("resize_mask: empty mask or target");
  }
  if (mask.rows() == rows && mask.cols() == cols) return mask;
  LabelImage out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Index sr = nearest_index(r, mask.rows(), rows);
    for (Index c = 0; c < cols; ++c) out(r, c) = mask(sr, nearest_index(c, mask.cols(), cols));
  }
  return out;
}

LabelImage remap_labels(const LabelImage& mask, const LabelRemap& remap) {
  LabelImage out = mask;
  for (Index i = 0; i < out.size(); ++i) {
    std::int32_t& v = out.data()[i];
    if (v == remap.to && remap.to != remap.from) {
      throw ContractError("remap_labels: label " + std::to_string(remap.to) +
                          " already present before remapping");
    }
    if (v == remap.from) {
      v = remap.to;
    } else if (v < 0 || v > 2) {
      throw ContractError("remap_labels: unexpected label " + std::to_string(v));
    }
  }
  return out;
}

TensorF one_hot(const LabelImage& mask, int num_classes) {
  const Index h = mask.rows(), w = mask.cols();
  TensorF out({num_classes, h, w});
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const std::int32_t label = mask(r, c);
      if (label < 0 || label >= num_classes) {
        throw ContractError("one_hot: label " + std::to_string(label) + " outside [0," +
                            std::to_string(num_classes) + ")");
      }
      out[(label * h + r) * w + c] = 1.0f;
    }
  }
  return out;
}

Volume normalize(const Volume& volume) {
  Volume out = volume;
  if (volume.voxels.size() == 0) return out;
  const float lo = volume.voxels.minCoeff();
  const float hi = volume.voxels.maxCoeff();
  if (!(hi > lo)) {
    out.voxels.setZero();
    return out;
  }
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  for (Index i = 0; i < out.voxels.size(); ++i) {
    out.voxels[i] = static_cast<float>((static_cast<double>(volume.voxels[i]) - lo) / range);
  }
  // Pin the extremes so min is exactly 0 and max exactly 1.
  for (Index i = 0; i < out.voxels.size(); ++i) {
    if (volume.voxels[i] == hi) out.voxels[i] = 1.0f;
  }
  return out;
}

}  // namespace aunet
