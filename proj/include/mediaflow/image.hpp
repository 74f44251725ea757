#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mediaflow {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, 0) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

// Binary PGM (P5) and PPM (P6), maxval 255. Throws MalformedImage.
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_image(const Image& image);

}  // namespace mediaflow
