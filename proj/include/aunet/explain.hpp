#ifndef AUNET_EXPLAIN_HPP
#define AUNET_EXPLAIN_HPP

#include "aunet/image_io.hpp"
#include "aunet/model.hpp"
#include "aunet/preprocess.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace aunet {

struct GradCamConfig {
  /// Classes whose pre-softmax logits are summed into the explained score.
  std::vector<int> target_classes{1, 2, 3};
  /// Restrict the score to pixels whose predicted class is one of the targets.
  bool masked = false;
  double sigma = 2.0;
  double alpha = 0.4;
  /// Multiplies the score before differentiation; the normalized map does not depend on it.
  double score_scale = 1.0;
  Index output_size = 128;

  void validate(int num_classes) const;
};

struct Heatmap {
  ImageOf<double> values;
  bool normalized = false;
};

struct GradCamResult {
  Heatmap heatmap;    // at the feature-map resolution, not normalized
  std::string layer;  // name of the explained layer
};

/// relu(sum_k a_k * A_k), where A_k are the penultimate activations and a_k the spatial
/// mean of d(score)/dA_k. `input` is [1,in_channels,H,W].
template <typename Scalar>
GradCamResult gradcam(const AttentionUNet<Scalar>& model, const Tensor<Scalar>& input,
                      const GradCamConfig& config);

/// Divides by the maximum when it is positive; an all-zero map stays zero.
Heatmap normalize_heatmap(const Heatmap& heatmap);

/// Bilinear resize on the same grid as resize_image, clamped to the input range.
Heatmap resize_heatmap(const Heatmap& heatmap, Index rows, Index cols);

/// Sampled Gaussian weights for offsets -radius..radius, radius = ceil(3 sigma), sum 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian with half-sample symmetric padding (d c b a | a b c d), which keeps
/// the map's sum. sigma < 0.5 returns the input unchanged. A normalized nonzero input is
/// re-normalized to max 1 afterwards.
Heatmap gaussian_smooth(const Heatmap& heatmap, double sigma);

/// Piecewise-linear ramp through blue (0), cyan (.25), green (.5), yellow (.75), red (1).
std::array<float, 3> colormap(double value);
RgbImage colorize(const Heatmap& heatmap);

/// (1 - alpha) * gray + alpha * colormap(heatmap), channels clamped to [0,1].
RgbImage overlay(const Image& gray, const Heatmap& heatmap, double alpha);

/// Writes original.ppm, heatmap.ppm, overlay.ppm and the side-by-side triptych.ppm into
/// `dir` and returns the triptych.
RgbImage render_triptych(const Image& original, const Heatmap& heatmap, const RgbImage& blended,
                         const std::filesystem::path& dir);

void write_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path);
Heatmap read_heatmap_csv(const std::filesystem::path& path);

}  // namespace aunet

#endif  // AUNET_EXPLAIN_HPP
