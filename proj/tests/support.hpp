#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <sodium.h>

#include "mediaflow/clock.hpp"
#include "mediaflow/image.hpp"

namespace mftest {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "mediaflow-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Monotone fake clock: every read advances by `step` ms.
class TickClock {
 public:
  explicit TickClock(mediaflow::Timestamp start = 1'700'000'000'000, mediaflow::Timestamp step = 1)
      : now_(start), step_(step) {}
  mediaflow::Clock fn() {
    return [this] { return now_.fetch_add(step_); };
  }
  mediaflow::Timestamp peek() const { return now_.load(); }

 private:
  std::atomic<mediaflow::Timestamp> now_;
  mediaflow::Timestamp step_;
};

// Independent SHA-256 (libsodium) for checking stored digests.
inline std::string sodium_sha256(std::span<const std::uint8_t> bytes) {
  if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  unsigned char out[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(out, bytes.data(), bytes.size());
  char hex[2 * crypto_hash_sha256_BYTES + 1];
  sodium_bin2hex(hex, sizeof hex, out, sizeof out);
  return hex;
}

inline std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

// Gray image with a deterministic pattern that varies with `salt`.
inline mediaflow::Image pattern_image(int w, int h, std::uint32_t salt = 0) {
  mediaflow::Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<std::uint8_t>((x * 31 + y * 17 + salt * 7) % 256);
  return img;
}

}  // namespace mftest
