#include <doctest.h>

#include "mediaflow/error.hpp"
#include "mediaflow/image.hpp"
#include "mediaflow/video.hpp"
#include "support.hpp"

using namespace mediaflow;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("PGM and PPM decode with header comments") {
  const std::string pgm = "P5\n# made by hand\n3 2\n# max\n255\n";
  std::vector<std::uint8_t> bytes(pgm.begin(), pgm.end());
  for (std::uint8_t v : {1, 2, 3, 4, 5, 6}) bytes.push_back(v);
  const auto img = decode_image(bytes);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  CHECK(img.at(2, 1) == 6);

  Image rgb(2, 2, 3);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) rgb.pixels[i] = static_cast<std::uint8_t>(i * 20);
  CHECK(decode_image(encode_image(rgb)) == rgb);
}

TEST_CASE("malformed images are rejected") {
  CHECK(code_of([] { decode_image(mftest::bytes_of("P2\n1 1\n255\n\x01")); }) == ErrorCode::MalformedImage);
  CHECK(code_of([] { decode_image(mftest::bytes_of("P5\n2 2\n255\n\x01")); }) == ErrorCode::MalformedImage);
  CHECK(code_of([] { decode_image(mftest::bytes_of("P5\n1 1\n65535\n\x01\x01")); }) == ErrorCode::MalformedImage);
  CHECK(code_of([] { decode_image(mftest::bytes_of("P5\n0 1\n255\n")); }) == ErrorCode::MalformedImage);
  CHECK(code_of([] { decode_image({}); }) == ErrorCode::MalformedImage);
}

TEST_CASE("video container layout is a JSON header line plus length-prefixed frames") {
  VideoContainer v;
  v.frame_rate = 2.5;
  v.frames = {encode_image(mftest::pattern_image(2, 2)), encode_image(mftest::pattern_image(3, 1, 4))};
  const auto bytes = encode_video(v);
  const std::string head(bytes.begin(), bytes.begin() + 30);
  CHECK(head == "{\"frame_rate\":2.5,\"frames\":2}\n");
  const auto first_len = v.frames[0].size();
  CHECK(bytes[30] == first_len);
  CHECK(bytes[31] == 0);
  CHECK(bytes[33] == 0);

  const auto back = decode_video(bytes);
  CHECK(back.frame_rate == 2.5);
  CHECK(back.frames == v.frames);
}

TEST_CASE("malformed containers are rejected") {
  CHECK(code_of([] { decode_video({}); }) == ErrorCode::MalformedContainer);
  CHECK(code_of([] { decode_video(mftest::bytes_of("{\"frame_rate\":1,\"frames\":0}\n")); }) ==
        ErrorCode::MalformedContainer);
  CHECK(code_of([] { decode_video(mftest::bytes_of("not json\n")); }) == ErrorCode::MalformedContainer);
  CHECK(code_of([] { decode_video(mftest::bytes_of("{\"frame_rate\":0,\"frames\":1}\n\x01\0\0\0x")); }) ==
        ErrorCode::MalformedContainer);

  VideoContainer v{1.0, {encode_image(mftest::pattern_image(2, 2))}};
  auto bytes = encode_video(v);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK(code_of([&] { decode_video(truncated); }) == ErrorCode::MalformedContainer);
  bytes.push_back(0);
  CHECK(code_of([&] { decode_video(bytes); }) == ErrorCode::MalformedContainer);
}

TEST_CASE("frame sampling indices") {
  // Native rate keeps every frame in order.
  CHECK(sample_frame_indices(10, 1.0, 1.0) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  // 10 s at 1 fps sampled at 0.5 fps: floor(k / 0.5 * 1) for k = 0..4.
  CHECK(sample_frame_indices(10, 1.0, 0.5) == std::vector<std::size_t>{0, 2, 4, 6, 8});
  // 30 frames at 30 fps (1 s) at 4 fps: floor(k * 7.5).
  CHECK(sample_frame_indices(30, 30.0, 4.0) == std::vector<std::size_t>{0, 7, 15, 22});
  // Too slow for even one frame still yields one.
  CHECK(sample_frame_indices(3, 1.0, 0.01) == std::vector<std::size_t>{0});
  // Faster than native is capped at native.
  CHECK(sample_frame_indices(4, 2.0, 10.0).size() == 4);
}
