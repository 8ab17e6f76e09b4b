#include "aunet/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aunet {

void GradCamConfig::validate(int num_classes) const {
  if (target_classes.empty()) throw ContractError("Grad-CAM needs at least one target class");
  for (int c : target_classes) {
    if (c < 0 || c >= num_classes) {
      throw ContractError("Grad-CAM target class " + std::to_string(c) + " outside [0," +
                          std::to_string(num_classes) + ")");
    }
  }
  if (!(sigma >= 0)) throw ContractError("Grad-CAM smoothing sigma must be >= 0");
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("overlay alpha must lie in [0,1]");
  if (!(score_scale > 0)) throw ContractError("Grad-CAM score scale must be positive");
  if (output_size < 1) throw ContractError("Grad-CAM output size must be positive");
}

template <typename Scalar>
GradCamResult gradcam(const AttentionUNet<Scalar>& model, const Tensor<Scalar>& input,
                      const GradCamConfig& config) {
  config.validate(model.config.num_classes);
  if (input.rank() != 4 || input.dim(0) != 1) {
    throw ShapeError("Grad-CAM input must be [1,C,H,W], got " + shape_string(input.shape()));
  }
  Graph<Scalar> g;
  BoundModel<Scalar> bound(g, model, false);
  // Only the input is marked differentiable; gradients still flow through every activation.
  const ForwardOutput out = forward(bound, g.variable(input));

  Tensor<Scalar> mask;
  if (config.masked) {
    const LabelMap labels = predict_mask(g.value(out.probs));
    mask = Tensor<Scalar>({1, 1, input.dim(2), input.dim(3)});
    for (Index i = 0; i < labels.size(); ++i) {
      const bool hit = std::find(config.target_classes.begin(), config.target_classes.end(),
                                 labels[i]) != config.target_classes.end();
      mask[i] = hit ? Scalar(1) : Scalar(0);
    }
  }
  Var score = g.channel_score(out.logits, config.target_classes, config.masked ? &mask : nullptr);
  if (config.score_scale != 1.0) score = g.affine(score, static_cast<Scalar>(config.score_scale), Scalar(0));
  g.backward(score);

  const Tensor<Scalar>& act = g.value(out.penultimate);
  const Tensor<Scalar>& grad = g.grad(out.penultimate);
  const Index k = act.dim(1), h = act.dim(2), w = act.dim(3), plane = h * w;
  Eigen::ArrayXd cam = Eigen::ArrayXd::Zero(plane);
  for (Index c = 0; c < k; ++c) {
    const double weight = grad.vec().segment(c * plane, plane).template cast<double>().mean();
    cam += weight * act.vec().segment(c * plane, plane).template cast<double>().array();
  }
  GradCamResult result;
  result.layer = kPenultimateLayer;
  result.heatmap.values = Eigen::Map<const ImageOf<double>>(cam.data(), h, w).max(0.0);
  return result;
}

template GradCamResult gradcam(const AttentionUNet<float>&, const Tensor<float>&,
                               const GradCamConfig&);
template GradCamResult gradcam(const AttentionUNet<double>&, const Tensor<double>&,
                               const GradCamConfig&);

Heatmap normalize_heatmap(const Heatmap& heatmap) {
  Heatmap out = heatmap;
  out.normalized = true;
  if (out.values.size() == 0) return out;
  const double peak = out.values.maxCoeff();
  if (peak > 0) out.values /= peak;
  return out;
}

Heatmap resize_heatmap(const Heatmap& heatmap, Index rows, Index cols) {
  Heatmap out;
  out.normalized = heatmap.normalized;
  out.values = resize_bilinear<double>(heatmap.values, rows, cols)
                   .cwiseMax(heatmap.values.minCoeff())
                   .cwiseMin(heatmap.values.maxCoeff());
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.5) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

namespace {

// Half-sample symmetric index folding into [0, n).
Index fold(Index i, Index n) {
  const Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

ImageOf<double> convolve_rows(const ImageOf<double>& in, const std::vector<double>& kernel) {
  const Index radius = static_cast<Index>(kernel.size() / 2);
  ImageOf<double> out(in.rows(), in.cols());
  for (Index y = 0; y < in.rows(); ++y) {
    for (Index x = 0; x < in.cols(); ++x) {
      double acc = 0;
      for (Index d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] * in(y, fold(x + d, in.cols()));
      }
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

Heatmap gaussian_smooth(const Heatmap& heatmap, double sigma) {
  if (sigma < 0.5) return heatmap;
  const std::vector<double> kernel = gaussian_kernel(sigma);
  Heatmap out;
  out.normalized = heatmap.normalized;
  const ImageOf<double> horizontal = convolve_rows(heatmap.values, kernel);
  out.values = convolve_rows(ImageOf<double>(horizontal.transpose()), kernel).transpose();
  if (heatmap.normalized && heatmap.values.maxCoeff() > 0) {
    const double peak = out.values.maxCoeff();
    if (peak > 0) out.values /= peak;
  }
  return out;
}

std::array<float, 3> colormap(double value) {
  static constexpr std::array<std::array<float, 3>, 5> kStops{{
      {0.0f, 0.0f, 1.0f},  // blue
      {0.0f, 1.0f, 1.0f},  // cyan
      {0.0f, 1.0f, 0.0f},  // green
      {1.0f, 1.0f, 0.0f},  // yellow
      {1.0f, 0.0f, 0.0f},  // red
  }};
  const double v = std::clamp(std::isfinite(value) ? value : 0.0, 0.0, 1.0) * 4.0;
  const int seg = std::min(3, static_cast<int>(std::floor(v)));
  const float t = static_cast<float>(v - seg);
  std::array<float, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c) {
    const float a = kStops[static_cast<std::size_t>(seg)][c];
    const float b = kStops[static_cast<std::size_t>(seg) + 1][c];
    rgb[c] = a + (b - a) * t;
  }
  return rgb;
}

RgbImage colorize(const Heatmap& heatmap) {
  const Index rows = heatmap.values.rows(), cols = heatmap.values.cols();
  RgbImage out{Image(rows, cols), Image(rows, cols), Image(rows, cols)};
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      const auto rgb = colormap(heatmap.values(y, x));
      out.r(y, x) = rgb[0];
      out.g(y, x) = rgb[1];
      out.b(y, x) = rgb[2];
    }
  }
  return out;
}

RgbImage overlay(const Image& gray, const Heatmap& heatmap, double alpha) {
  if (gray.rows() != heatmap.values.rows() || gray.cols() != heatmap.values.cols()) {
    throw ShapeError("overlay: image and heatmap sizes differ");
  }
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("overlay alpha must lie in [0,1]");
  const RgbImage color = colorize(heatmap);
  const float a = static_cast<float>(alpha);
  auto blend = [&](const Image& c) {
    return Image(((1.0f - a) * gray + a * c).cwiseMax(0.0f).cwiseMin(1.0f));
  };
  return {blend(color.r), blend(color.g), blend(color.b)};
}

RgbImage render_triptych(const Image& original, const Heatmap& heatmap, const RgbImage& blended,
                         const std::filesystem::path& dir) {
  if (original.rows() != heatmap.values.rows() || original.cols() != heatmap.values.cols() ||
      original.rows() != blended.rows() || original.cols() != blended.cols()) {
    throw ShapeError("triptych panels differ in size");
  }
  const RgbImage panel0 = gray_to_rgb(original.cwiseMax(0.0f).cwiseMin(1.0f));
  const RgbImage panel1 = colorize(heatmap);
  const RgbImage triptych = hconcat({panel0, panel1, blended});
  write_ppm(dir / "original.ppm", panel0);
  write_ppm(dir / "heatmap.ppm", panel1);
  write_ppm(dir / "overlay.ppm", blended);
  write_ppm(dir / "triptych.ppm", triptych);
  return triptych;
}

void write_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write heatmap to " + path.string());
  char cell[32];
  for (Index y = 0; y < heatmap.values.rows(); ++y) {
    for (Index x = 0; x < heatmap.values.cols(); ++x) {
      std::snprintf(cell, sizeof cell, "%.17g", heatmap.values(y, x));
      if (x) out << ',';
      out << cell;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing heatmap to " + path.string());
}

Heatmap read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read heatmap from " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ": ragged heatmap rows");
    }
    rows.push_back(std::move(row));
  }
  Heatmap h;
  if (rows.empty()) return h;
  h.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < rows[y].size(); ++x) {
      h.values(static_cast<Index>(y), static_cast<Index>(x)) = rows[y][x];
    }
  }
  return h;
}

}  // namespace aunet
