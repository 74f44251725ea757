#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace mediaflow {

// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
using Clock = std::function<Timestamp()>;

inline Timestamp system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline Clock system_clock() { return &system_now_ms; }

}  // namespace mediaflow
