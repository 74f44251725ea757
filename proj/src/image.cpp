#include "mediaflow/image.hpp"

#include <cctype>
#include <string>

#include "mediaflow/error.hpp"

namespace mediaflow {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  long next_number() {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) fail("header number too long");
    }
    if (digits == 0) fail("expected a number in header");
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  [[noreturn]] static void fail(const std::string& why) {
    throw Error(ErrorCode::MalformedImage, why);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw Error(ErrorCode::MalformedImage, "not a binary PGM/PPM image");
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader header(bytes);
  const long width = header.next_number();
  const long height = header.next_number();
  const long maxval = header.next_number();
  if (width <= 0 || height <= 0) throw Error(ErrorCode::MalformedImage, "zero image dimension");
  if (maxval != 255) throw Error(ErrorCode::MalformedImage, "only 8-bit images are supported");
  const std::size_t offset = header.raster_offset();
  const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - offset < needed) throw Error(ErrorCode::MalformedImage, "truncated raster");
  Image img(static_cast<int>(width), static_cast<int>(height), channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(offset), needed, img.pixels.begin());
  return img;
}

std::vector<std::uint8_t> encode_image(const Image& image) {
  std::string header = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) +
                       " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

}  // namespace mediaflow
