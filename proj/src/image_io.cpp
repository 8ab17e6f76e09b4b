#include "aunet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aunet {

RgbImage gray_to_rgb(const Image& gray) { return {gray, gray, gray}; }

RgbImage hconcat(const std::vector<RgbImage>& panels) {
  if (panels.empty()) throw ShapeError("hconcat of no panels");
  Index cols = 0;
  for (const RgbImage& p : panels) {
    if (p.rows() != panels.front().rows()) throw ShapeError("hconcat panels differ in height");
    cols += p.cols();
  }
  const Index rows = panels.front().rows();
  RgbImage out{Image(rows, cols), Image(rows, cols), Image(rows, cols)};
  Index at = 0;
  for (const RgbImage& p : panels) {
    out.r.block(0, at, rows, p.cols()) = p.r;
    out.g.block(0, at, rows, p.cols()) = p.g;
    out.b.block(0, at, rows, p.cols()) = p.b;
    at += p.cols();
  }
  return out;
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  const std::string header =
      "P6\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  std::vector<char> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + static_cast<std::size_t>(3 * image.rows() * image.cols()));
  for (Index y = 0; y < image.rows(); ++y) {
    for (Index x = 0; x < image.cols(); ++x) {
      bytes.push_back(static_cast<char>(quantize(image.r(y, x))));
      bytes.push_back(static_cast<char>(quantize(image.g(y, x))));
      bytes.push_back(static_cast<char>(quantize(image.b(y, x))));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing image " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read image " + path.string());
  std::string magic;
  Index cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  if (magic != "P6" || cols < 1 || rows < 1 || maxval != 255) {
    throw std::runtime_error(path.string() + ": not an 8-bit binary PPM");
  }
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> px(static_cast<std::size_t>(3 * rows * cols));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  RgbImage img{Image(rows, cols), Image(rows, cols), Image(rows, cols)};
  std::size_t k = 0;
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      img.r(y, x) = px[k++] / 255.0f;
      img.g(y, x) = px[k++] / 255.0f;
      img.b(y, x) = px[k++] / 255.0f;
    }
  }
  return img;
}

}  // namespace aunet
