#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>

#include "mediaflow/canonical_json.hpp"

namespace mediaflow {

// In-process FIFO persisted as an append-only log of push/ack entries.
// Each message is handed to exactly one consumer; unacknowledged messages are
// redelivered after a restart.
class DurableQueue {
 public:
  struct Delivery {
    std::uint64_t id = 0;
    Json message;
  };

  explicit DurableQueue(std::filesystem::path log_path);

  std::uint64_t push(const Json& message);
  std::optional<Delivery> try_pop();
  void ack(std::uint64_t id);

  std::size_t pending() const;
  std::size_t in_flight() const;
  // Waits until a message is pending or the timeout elapses.
  bool wait(std::chrono::milliseconds timeout) const;

 private:
  std::filesystem::path log_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::deque<Delivery> pending_;
  std::set<std::uint64_t> in_flight_;
  std::uint64_t next_id_ = 1;
};

}  // namespace mediaflow
