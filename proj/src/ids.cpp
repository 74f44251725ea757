#include "mediaflow/ids.hpp"

#include <cstdio>
#include <chrono>
#include <random>

#include "mediaflow/mixing.hpp"

namespace mediaflow {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

std::optional<Id128> Id128::parse(std::string_view hex) {
  if (hex.size() != 32) return std::nullopt;
  std::uint64_t words[2] = {0, 0};
  for (std::size_t i = 0; i < 32; ++i) {
    int v = hex_value(hex[i]);
    if (v < 0) return std::nullopt;
    words[i / 16] = (words[i / 16] << 4) | static_cast<std::uint64_t>(v);
  }
  return Id128(words[0], words[1]);
}

std::string Id128::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi_),
                static_cast<unsigned long long>(lo_));
  return std::string(buf, 32);
}

IdGenerator::IdGenerator() {
  std::random_device rd;
  seed_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  seed_ ^= static_cast<std::uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count());
}

IdGenerator::IdGenerator(std::uint64_t seed) : seed_(seed) {}

Id128 IdGenerator::next() {
  std::uint64_t n;
  {
    std::lock_guard lock(mutex_);
    n = counter_++;
  }
  return Id128(hash_words(seed_, {n, 1}), hash_words(seed_, {n, 2}));
}

}  // namespace mediaflow
