#ifndef AUNET_IMAGE_IO_HPP
#define AUNET_IMAGE_IO_HPP

#include "aunet/preprocess.hpp"

#include <cstdint>
#include <filesystem>

namespace aunet {

/// Three float planes with values in [0,1].
struct RgbImage {
  Image r, g, b;

  Index rows() const { return r.rows(); }
  Index cols() const { return r.cols(); }
};

RgbImage gray_to_rgb(const Image& gray);

/// Side-by-side concatenation; all panels must share a height.
RgbImage hconcat(const std::vector<RgbImage>& panels);

/// round-half-up of v*255 after clamping to [0,1].
std::uint8_t quantize(float v);

/// Binary PPM: "P6\n<cols> <rows>\n255\n" followed by RGB bytes, no comments.
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

}  // namespace aunet

#endif  // AUNET_IMAGE_IO_HPP
