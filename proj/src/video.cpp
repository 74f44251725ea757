#include "mediaflow/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/error.hpp"

namespace mediaflow {

VideoContainer decode_video(std::span<const std::uint8_t> bytes) {
  auto newline = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (bytes.empty() || newline == bytes.end())
    throw Error(ErrorCode::MalformedContainer, "missing container header");
  Json header = Json::parse(bytes.begin(), newline, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("frame_rate") ||
      !header.contains("frames") || !header["frame_rate"].is_number() ||
      !header["frames"].is_number_unsigned())
    throw Error(ErrorCode::MalformedContainer, "bad container header");
  VideoContainer video;
  video.frame_rate = header["frame_rate"].get<double>();
  const auto count = header["frames"].get<std::uint64_t>();
  if (!(video.frame_rate > 0) || !std::isfinite(video.frame_rate))
    throw Error(ErrorCode::MalformedContainer, "frame_rate must be positive");
  if (count == 0) throw Error(ErrorCode::MalformedContainer, "container has no frames");

  std::size_t pos = static_cast<std::size_t>(newline - bytes.begin()) + 1;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (bytes.size() - pos < 4) throw Error(ErrorCode::MalformedContainer, "truncated frame length");
    std::uint32_t len = 0;
    for (int b = 3; b >= 0; --b) len = (len << 8) | bytes[pos + static_cast<std::size_t>(b)];
    pos += 4;
    if (len == 0 || bytes.size() - pos < len)
      throw Error(ErrorCode::MalformedContainer, "truncated frame " + std::to_string(i));
    video.frames.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                              bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  if (pos != bytes.size()) throw Error(ErrorCode::MalformedContainer, "trailing bytes after frames");
  return video;
}

std::vector<std::uint8_t> encode_video(const VideoContainer& video) {
  Json header = {{"frame_rate", video.frame_rate}, {"frames", video.frames.size()}};
  std::string head = header.dump() + "\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  for (const auto& frame : video.frames) {
    const auto len = static_cast<std::uint32_t>(frame.size());
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, double native_rate,
                                              double rate) {
  rate = std::min(rate, native_rate);
  const double duration = static_cast<double>(frame_count) / native_rate;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(duration * rate + 1e-9)));
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(k) * native_rate / rate + 1e-9));
    out.push_back(std::min(idx, frame_count - 1));
  }
  return out;
}

}  // namespace mediaflow
