#include "aunet/explain.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <cmath>

using namespace aunet;
using aunet::testing::random_tensor;
using aunet::testing::read_bytes;
using aunet::testing::TempDir;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.depth = 2;
  c.base_filters = 4;
  c.seed = 3;
  return c;
}

Heatmap map_of(const ImageOf<double>& v, bool normalized = false) {
  Heatmap h;
  h.values = v;
  h.normalized = normalized;
  return h;
}

ImageOf<double> random_map(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  ImageOf<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("grad-cam heatmap is non-negative at feature-map resolution") {
  const AttentionUNet<double> m = build_model<double>(small_model());
  std::mt19937_64 rng(1);
  const TensorD x = random_tensor({1, 2, 16, 16}, rng, 0, 1);
  const GradCamResult r = gradcam(m, x, GradCamConfig{});
  CHECK(r.layer == "dec0.conv2");
  CHECK(r.heatmap.values.rows() == 16);
  CHECK(r.heatmap.values.cols() == 16);
  CHECK((r.heatmap.values >= 0).all());
  CHECK_FALSE(r.heatmap.normalized);
}

TEST_CASE("grad-cam is zero when the target logits ignore the features") {
  AttentionUNet<double> m = build_model<double>(small_model());
  Tensor<double>& head = m.params.at("head.weight");
  for (Index c = 1; c < 4; ++c) head.vec().segment(c * 4, 4).setZero();
  std::mt19937_64 rng(2);
  const GradCamResult r = gradcam(m, random_tensor({1, 2, 16, 16}, rng, 0, 1), GradCamConfig{});
  CHECK((r.heatmap.values == 0).all());
  CHECK((normalize_heatmap(r.heatmap).values == 0).all());
}

TEST_CASE("grad-cam with one feature map is proportional to its activation") {
  // Force a single live channel in dec0.conv2 with a positive head weight.
  AttentionUNet<double> m = build_model<double>(small_model());
  Tensor<double>& w = m.params.at("dec0.conv2.weight");
  Tensor<double>& b = m.params.at("dec0.conv2.bias");
  const Index per_out = w.size() / 4;
  for (Index k = 1; k < 4; ++k) {
    w.vec().segment(k * per_out, per_out).setZero();
    b[k] = -1.0;  // relu keeps these channels at zero
  }
  b[0] = 0.5;
  Tensor<double>& head = m.params.at("head.weight");
  head.vec().setZero();
  head[1 * 4 + 0] = 0.8;  // class 1 reads channel 0
  GradCamConfig cfg;
  cfg.target_classes = {1};
  std::mt19937_64 rng(3);
  const TensorD x = random_tensor({1, 2, 16, 16}, rng, 0, 1);
  const GradCamResult r = gradcam(m, x, cfg);

  Graph<double> g;
  BoundModel<double> bound(g, m, false);
  const TensorD act = g.value(forward(bound, g.constant(x)).penultimate);
  // alpha_0 = mean of d(sum of class-1 logits)/dA_0 = 0.8 at every pixel.
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) {
      CHECK(r.heatmap.values(i, j) == doctest::Approx(0.8 * act(0, 0, i, j)).epsilon(1e-12));
    }
}

TEST_CASE("normalized grad-cam is unchanged by positive score scaling") {
  const AttentionUNet<double> m = build_model<double>(small_model());
  std::mt19937_64 rng(4);
  const TensorD x = random_tensor({1, 2, 16, 16}, rng, 0, 1);
  GradCamConfig cfg;
  const Heatmap base = normalize_heatmap(gradcam(m, x, cfg).heatmap);
  for (double lambda : {0.25, 2.0, 64.0}) {
    cfg.score_scale = lambda;
    const Heatmap scaled = gradcam(m, x, cfg).heatmap;
    CHECK((normalize_heatmap(scaled).values == base.values).all());
  }
}

TEST_CASE("grad-cam rejects invalid classes and inputs") {
  const AttentionUNet<double> m = build_model<double>(small_model());
  GradCamConfig cfg;
  cfg.target_classes = {4};
  CHECK_THROWS_AS(gradcam(m, TensorD({1, 2, 16, 16}), cfg), ContractError);
  CHECK_THROWS_AS(gradcam(m, TensorD({2, 2, 16, 16}), GradCamConfig{}), ShapeError);
  cfg = {};
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(4), ContractError);
  cfg = {};
  cfg.sigma = -1;
  CHECK_THROWS_AS(cfg.validate(4), ContractError);
}

TEST_CASE("masked grad-cam only scores predicted target pixels") {
  const AttentionUNet<double> m = build_model<double>(small_model());
  std::mt19937_64 rng(5);
  const TensorD x = random_tensor({1, 2, 16, 16}, rng, 0, 1);
  GradCamConfig cfg;
  cfg.masked = true;
  const GradCamResult r = gradcam(m, x, cfg);
  CHECK((r.heatmap.values >= 0).all());
}

TEST_CASE("heatmap normalization") {
  ImageOf<double> v(2, 2);
  v << 1, 2, 4, 0;
  const Heatmap n = normalize_heatmap(map_of(v));
  CHECK(n.normalized);
  CHECK(n.values.maxCoeff() == 1.0);
  CHECK(n.values(0, 1) == 0.5);
  CHECK((normalize_heatmap(n).values == n.values).all());
  const Heatmap z = normalize_heatmap(map_of(ImageOf<double>::Zero(3, 3)));
  CHECK(z.normalized);
  CHECK((z.values == 0).all());
}

TEST_CASE("heatmap resize keeps constants and bounds") {
  const Heatmap c = resize_heatmap(map_of(ImageOf<double>::Constant(4, 4, 0.6), true), 128, 128);
  CHECK(c.values.rows() == 128);
  CHECK((c.values == 0.6).all());
  std::mt19937_64 rng(6);
  const Heatmap r = normalize_heatmap(map_of(random_map(8, 8, rng)));
  const Heatmap up = resize_heatmap(r, 128, 128);
  CHECK(up.values.maxCoeff() <= r.values.maxCoeff());
  CHECK(up.values.minCoeff() >= 0.0);
}

TEST_CASE("gaussian kernel and smoothing") {
  const auto k = gaussian_kernel(1.0);
  REQUIRE(k.size() == 7);
  double sum = 0;
  for (double v : k) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  double raw = 0;
  for (int i = -3; i <= 3; ++i) raw += std::exp(-0.5 * i * i);
  CHECK(k[3] == doctest::Approx(1.0 / raw).epsilon(1e-14));

  ImageOf<double> impulse = ImageOf<double>::Zero(15, 15);
  impulse(7, 7) = 1.0;
  const Heatmap s = gaussian_smooth(map_of(impulse), 1.0);
  CHECK(s.values(7, 7) == doctest::Approx(k[3] * k[3]).epsilon(1e-14));

  std::mt19937_64 rng(7);
  const Heatmap r = map_of(random_map(9, 13, rng));
  const Heatmap same = gaussian_smooth(r, 0.0);
  CHECK((same.values == r.values).all());
  CHECK((gaussian_smooth(r, 0.49).values == r.values).all());

  for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
    const Heatmap c = gaussian_smooth(map_of(ImageOf<double>::Constant(10, 12, 0.37)), sigma);
    CHECK((c.values - 0.37).abs().maxCoeff() <= 1e-6);
    const Heatmap sm = gaussian_smooth(r, sigma);
    CHECK(std::abs(sm.values.mean() - r.values.mean()) <= 1e-6);
  }
  const Heatmap renorm = gaussian_smooth(normalize_heatmap(r), 2.0);
  CHECK(renorm.values.maxCoeff() == 1.0);
}

TEST_CASE("colormap control points") {
  using C = std::array<float, 3>;
  CHECK(colormap(0.0) == C{0, 0, 1});
  CHECK(colormap(0.25) == C{0, 1, 1});
  CHECK(colormap(0.5) == C{0, 1, 0});
  CHECK(colormap(0.75) == C{1, 1, 0});
  CHECK(colormap(1.0) == C{1, 0, 0});
  CHECK(colormap(0.125)[2] == 1.0f);
  CHECK(colormap(0.125)[1] == doctest::Approx(0.5));
}

TEST_CASE("overlay blending") {
  std::mt19937_64 rng(8);
  Image gray(6, 5);
  std::uniform_real_distribution<float> u(0, 1);
  for (Index i = 0; i < gray.size(); ++i) gray.data()[i] = u(rng);
  const Heatmap h = normalize_heatmap(map_of(random_map(6, 5, rng)));
  const RgbImage g0 = overlay(gray, h, 0.0);
  CHECK((g0.r == gray).all());
  CHECK((g0.g == gray).all());
  CHECK((g0.b == gray).all());
  const RgbImage red = overlay(gray, map_of(ImageOf<double>::Ones(6, 5), true), 1.0);
  CHECK((red.r == 1.0f).all());
  CHECK((red.g == 0.0f).all());
  CHECK((red.b == 0.0f).all());
  for (int trial = 0; trial < 20; ++trial) {
    const RgbImage o = overlay(gray, normalize_heatmap(map_of(random_map(6, 5, rng))), u(rng));
    for (const Image* c : {&o.r, &o.g, &o.b}) {
      CHECK(c->minCoeff() >= 0.0f);
      CHECK(c->maxCoeff() <= 1.0f);
    }
  }
  CHECK_THROWS_AS(overlay(gray, h, 1.2), ContractError);
}

TEST_CASE("triptych layout, quantization and parse-back") {
  TempDir dir;
  std::mt19937_64 rng(9);
  Image gray(128, 128);
  std::uniform_real_distribution<float> u(0, 1);
  for (Index i = 0; i < gray.size(); ++i) gray.data()[i] = u(rng);
  gray(0, 0) = 0.5f / 255.0f;  // exactly half a step rounds up
  const Heatmap h = normalize_heatmap(map_of(random_map(128, 128, rng)));
  const RgbImage o = overlay(gray, h, 0.4);
  const RgbImage t = render_triptych(gray, h, o, dir.path());
  CHECK(t.cols() == 384);
  CHECK(t.rows() == 128);
  const RgbImage back = read_ppm(dir / "triptych.ppm");
  CHECK(back.cols() == 384);
  CHECK(back.rows() == 128);
  for (Index y = 0; y < 128; ++y)
    for (Index x = 0; x < 128; ++x) {
      const auto expected = static_cast<float>(std::floor(gray(y, x) * 255.0f + 0.5f));
      REQUIRE(back.r(y, x) * 255.0f == doctest::Approx(expected));
      REQUIRE(back.b(y, x) == back.r(y, x));
    }
  CHECK(quantize(0.5f / 255.0f) == 1);
  const std::string header = read_bytes(dir / "original.ppm").substr(0, 15);
  CHECK(header == "P6\n128 128\n255\n");
  CHECK(read_bytes(dir / "heatmap.ppm").size() == 15 + 3 * 128 * 128);
  CHECK(read_bytes(dir / "overlay.ppm").size() == 15 + 3 * 128 * 128);
  CHECK_THROWS(write_ppm(dir / "missing" / "x.ppm", o));
}

TEST_CASE("heatmap csv round trip is exact") {
  TempDir dir;
  std::mt19937_64 rng(10);
  const Heatmap h = map_of(random_map(5, 7, rng));
  write_heatmap_csv(h, dir / "h.csv");
  CHECK((read_heatmap_csv(dir / "h.csv").values == h.values).all());
}
