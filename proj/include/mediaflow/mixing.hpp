#pragma once

// Deterministic 64-bit mixing used for every seeded draw in the project.
//
//   mix64(z):  z += 0x9E3779B97F4A7C15
//              z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//              z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//              return z ^ (z >> 31)
//
//   hash_words(seed, w1..wk):  h = mix64(seed); for each w: h = mix64(h ^ w)
//   hash_string(s):            FNV-1a 64 over the UTF-8 bytes
//   unit_interval(h):          (h >> 11) * 2^-53, in [0, 1)
//
// mix64 is the splitmix64 finalizer; mix64(0) == 0xE220A8397B1DCDAF.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace mediaflow {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_words(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = mix64(seed);
  for (auto w : words) h = mix64(h ^ w);
  return h;
}

constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t hash_bytes(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr double unit_interval(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Small deterministic stream built on mix64, for seeded shuffles and choices.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }

  double unit() noexcept { return unit_interval(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace mediaflow
