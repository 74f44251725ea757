#include "mediaflow/durable_queue.hpp"

#include <algorithm>
#include <map>

#include "mediaflow/fs_util.hpp"

namespace mediaflow {

DurableQueue::DurableQueue(std::filesystem::path log_path) : log_(std::move(log_path)) {
  std::map<std::uint64_t, Json> live;
  for (const auto& line : fsutil::read_lines(log_)) {
    auto entry = Json::parse(line, nullptr, false);
    if (entry.is_discarded()) continue;  // torn final line
    const auto id = entry.at("id").get<std::uint64_t>();
    if (entry.at("op") == "push") {
      live[id] = entry.at("msg");
      next_id_ = std::max(next_id_, id + 1);
    } else {
      live.erase(id);
    }
  }
  for (auto& [id, msg] : live) pending_.push_back({id, std::move(msg)});
}

std::uint64_t DurableQueue::push(const Json& message) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  fsutil::append_line(log_, canonical_dump(Json{{"op", "push"}, {"id", id}, {"msg", message}}));
  pending_.push_back({id, message});
  cv_.notify_one();
  return id;
}

std::optional<DurableQueue::Delivery> DurableQueue::try_pop() {
  std::lock_guard lock(mutex_);
  if (pending_.empty()) return std::nullopt;
  auto d = std::move(pending_.front());
  pending_.pop_front();
  in_flight_.insert(d.id);
  return d;
}

void DurableQueue::ack(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  if (in_flight_.erase(id) == 0) return;
  fsutil::append_line(log_, canonical_dump(Json{{"op", "ack"}, {"id", id}}));
}

std::size_t DurableQueue::pending() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

std::size_t DurableQueue::in_flight() const {
  std::lock_guard lock(mutex_);
  return in_flight_.size();
}

bool DurableQueue::wait(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return !pending_.empty(); });
}

}  // namespace mediaflow
