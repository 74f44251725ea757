#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mediaflow/asset_store.hpp"
#include "mediaflow/canonical_json.hpp"
#include "mediaflow/clock.hpp"
#include "mediaflow/fair_mutex.hpp"
#include "mediaflow/ids.hpp"

namespace mediaflow {

enum class RecordStatus { Ok, Failed };

std::string_view to_string(RecordStatus status);

struct MetadataRecord {
  AssetId asset_id;
  std::string operator_name;
  std::uint32_t version = 0;  // 1-based per (asset_id, operator_name)
  Timestamp produced_at = 0;
  std::optional<ExecutionId> execution_id;
  Json body;
  RecordStatus status = RecordStatus::Ok;
};

Json to_json(const MetadataRecord& record);
MetadataRecord metadata_record_from_json(const Json& doc);

struct MetadataEvent {
  AssetId asset_id;
  std::string operator_name;
  std::uint32_t version = 0;
  std::uint64_t sequence = 0;  // global, gap-free, starts at 1
};

Json to_json(const MetadataEvent& event);

// Append-only, versioned store of operator outputs. Each commit appends one
// line to metadata/records.ndjson and one to metadata/events.ndjson under a
// single critical section, so the event log is a complete replay source.
class MetadataStore {
 public:
  static constexpr std::size_t kMaxBodyBytes = 4u << 20;

  struct Options {
    Clock clock = system_clock();
    std::size_t max_body_bytes = kMaxBodyBytes;
  };

  MetadataStore(std::filesystem::path root, const AssetStore& assets);
  MetadataStore(std::filesystem::path root, const AssetStore& assets, Options options);

  MetadataStore(const MetadataStore&) = delete;
  MetadataStore& operator=(const MetadataStore&) = delete;

  std::uint32_t store_metadata(const AssetId& asset_id, const std::string& operator_name,
                               Json body, RecordStatus status,
                               std::optional<ExecutionId> execution_id = std::nullopt);

  // Latest version per operator (ordered by operator name) when operator_name
  // is absent; full ascending history otherwise.
  std::vector<MetadataRecord> get_metadata(
      const AssetId& asset_id, std::optional<std::string_view> operator_name = std::nullopt) const;

  std::optional<MetadataRecord> find_record(const AssetId& asset_id,
                                            std::string_view operator_name,
                                            std::uint32_t version) const;

  std::vector<MetadataEvent> events_after(std::uint64_t sequence) const;
  std::uint64_t last_sequence() const;

  // Every committed record, in commit order.
  std::vector<MetadataRecord> all_records() const;

  // Blocks until an event beyond `sequence` exists or the timeout elapses.
  bool wait_for_events(std::uint64_t sequence, std::chrono::milliseconds timeout) const;

 private:
  using PairKey = std::pair<AssetId, std::string>;

  std::mutex& pair_mutex(const PairKey& key);

  std::filesystem::path dir_;
  const AssetStore& assets_;
  Options options_;

  std::mutex pair_locks_mutex_;
  std::map<PairKey, std::unique_ptr<std::mutex>> pair_locks_;

  mutable FairSharedMutex mutex_;
  mutable std::condition_variable_any events_cv_;
  std::vector<MetadataRecord> records_;
  std::vector<MetadataEvent> events_;
  std::map<PairKey, std::vector<std::size_t>> history_;  // indices into records_
};

}  // namespace mediaflow
