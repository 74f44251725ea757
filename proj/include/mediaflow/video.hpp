#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mediaflow {

// Minimal video container:
//   {"frame_rate": r, "frames": n}\n      UTF-8 JSON header line
//   n × ( uint32 little-endian length, PGM/PPM payload )
struct VideoContainer {
  double frame_rate = 0.0;  // frames per second
  std::vector<std::vector<std::uint8_t>> frames;
};

// Throws MalformedContainer (empty, truncated, bad header, zero frames).
VideoContainer decode_video(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_video(const VideoContainer& video);

// Source frame indices selected when sampling `frame_count` frames recorded
// at `native_rate` down to `rate`: k-th pick = floor(k * native_rate / rate),
// count = max(1, floor(frame_count * rate / native_rate)). Rates above the
// native rate sample at the native rate.
std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, double native_rate,
                                              double rate);

}  // namespace mediaflow
