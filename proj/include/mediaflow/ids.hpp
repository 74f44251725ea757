#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace mediaflow {

// 128-bit identifier rendered as 32 lowercase hex characters.
class Id128 {
 public:
  Id128() = default;
  Id128(std::uint64_t hi, std::uint64_t lo) : hi_(hi), lo_(lo) {}

  static std::optional<Id128> parse(std::string_view hex);

  std::string hex() const;
  std::uint64_t hi() const { return hi_; }
  std::uint64_t lo() const { return lo_; }

  auto operator<=>(const Id128&) const = default;

 private:
  std::uint64_t hi_ = 0;
  std::uint64_t lo_ = 0;
};

struct AssetTag {};
struct ExecutionTag {};

template <class Tag>
class StrongId {
 public:
  StrongId() = default;
  explicit StrongId(Id128 raw) : raw_(raw) {}

  static std::optional<StrongId> parse(std::string_view hex) {
    auto raw = Id128::parse(hex);
    if (!raw) return std::nullopt;
    return StrongId(*raw);
  }

  std::string hex() const { return raw_.hex(); }
  const Id128& raw() const { return raw_; }

  auto operator<=>(const StrongId&) const = default;

 private:
  Id128 raw_;
};

using AssetId = StrongId<AssetTag>;
using ExecutionId = StrongId<ExecutionTag>;

// Thread-safe id source. Seeded generators produce a reproducible sequence;
// unseeded ones draw from std::random_device.
class IdGenerator {
 public:
  IdGenerator();
  explicit IdGenerator(std::uint64_t seed);

  Id128 next();

 private:
  std::mutex mutex_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace mediaflow

template <class Tag>
struct std::hash<mediaflow::StrongId<Tag>> {
  std::size_t operator()(const mediaflow::StrongId<Tag>& id) const noexcept {
    return static_cast<std::size_t>(id.raw().hi() ^ (id.raw().lo() * 0x9E3779B97F4A7C15ULL));
  }
};
