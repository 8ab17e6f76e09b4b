#ifndef AUNET_PREPROCESS_HPP
#define AUNET_PREPROCESS_HPP

#include "aunet/nifti.hpp"
#include "aunet/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aunet {

using Image = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelImage = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Axial slice window: `count` consecutive slices starting at `start`.
struct SliceWindow {
  Index start = 22;
  Index count = 100;
};

/// Raw label value replaced during remapping (enhancing tumor 4 becomes 3).
struct LabelRemap {
  std::int32_t from = 4;
  std::int32_t to = 3;
};

/// z indices of the window; RangeError when the volume is too shallow.
std::vector<Index> window_indices(Index depth, const SliceWindow& window);

/// Slice z as an image with rows = y and columns = x.
Image axial_slice(const Volume& volume, Index z);
LabelImage axial_labels(const Volume& volume, Index z);

template <typename Scalar>
using ImageOf = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bilinear resampling; output pixel i samples source coordinate (i+0.5)*in/out - 0.5,
/// clamped to the image. Equal sizes reproduce the input exactly.
template <typename Scalar>
ImageOf<Scalar> resize_bilinear(const ImageOf<Scalar>& image, Index rows, Index cols);

inline Image resize_image(const Image& image, Index rows, Index cols) {
  return resize_bilinear<float>(image, rows, cols);
}

/// Nearest-neighbour resampling on the same grid, rounding half toward the lower index.
LabelImage resize_mask(const LabelImage& mask, Index rows, Index cols);

/// Replaces remap.from by remap.to. Input values must lie in {0,1,2,from}; a label equal to
/// remap.to in the input is a contract violation.
LabelImage remap_labels(const LabelImage& mask, const LabelRemap& remap = {});

/// [classes,H,W] indicator tensor. Labels outside [0,classes) are a contract violation.
TensorF one_hot(const LabelImage& mask, int num_classes = 4);

/// (v - min) / (max - min) over the whole volume; constant volumes become zeros.
Volume normalize(const Volume& volume);

}  // namespace aunet

#endif  // AUNET_PREPROCESS_HPP
