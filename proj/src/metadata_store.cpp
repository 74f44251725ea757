#include "mediaflow/metadata_store.hpp"

#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

std::string_view to_string(RecordStatus status) {
  return status == RecordStatus::Ok ? "Ok" : "Failed";
}

Json to_json(const MetadataRecord& r) {
  return Json{
      {"asset_id", r.asset_id.hex()},
      {"operator", r.operator_name},
      {"version", r.version},
      {"produced_at", r.produced_at},
      {"execution_id", r.execution_id ? Json(r.execution_id->hex()) : Json(nullptr)},
      {"body", r.body},
      {"status", to_string(r.status)},
  };
}

MetadataRecord metadata_record_from_json(const Json& doc) {
  MetadataRecord r;
  auto id = AssetId::parse(doc.at("asset_id").get<std::string>());
  if (!id) throw Error(ErrorCode::StorageFailure, "corrupt metadata record");
  r.asset_id = *id;
  r.operator_name = doc.at("operator").get<std::string>();
  r.version = doc.at("version").get<std::uint32_t>();
  r.produced_at = doc.at("produced_at").get<Timestamp>();
  if (const auto& e = doc.at("execution_id"); e.is_string()) r.execution_id = ExecutionId::parse(e.get<std::string>());
  r.body = doc.at("body");
  r.status = doc.at("status").get<std::string>() == "Ok" ? RecordStatus::Ok : RecordStatus::Failed;
  return r;
}

Json to_json(const MetadataEvent& e) {
  return Json{{"asset_id", e.asset_id.hex()},
              {"operator", e.operator_name},
              {"version", e.version},
              {"sequence", e.sequence}};
}

MetadataStore::MetadataStore(fs::path root, const AssetStore& assets)
    : MetadataStore(std::move(root), assets, Options{}) {}

MetadataStore::MetadataStore(fs::path root, const AssetStore& assets, Options options)
    : dir_(std::move(root) / "metadata"), assets_(assets), options_(std::move(options)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir_.string());
  for (const auto& line : fsutil::read_lines(dir_ / "records.ndjson")) {
    auto r = metadata_record_from_json(Json::parse(line));
    history_[{r.asset_id, r.operator_name}].push_back(records_.size());
    records_.push_back(std::move(r));
  }
  for (const auto& line : fsutil::read_lines(dir_ / "events.ndjson")) {
    auto doc = Json::parse(line);
    MetadataEvent e;
    e.asset_id = *AssetId::parse(doc.at("asset_id").get<std::string>());
    e.operator_name = doc.at("operator").get<std::string>();
    e.version = doc.at("version").get<std::uint32_t>();
    e.sequence = doc.at("sequence").get<std::uint64_t>();
    events_.push_back(std::move(e));
  }
  // A crash between the two appends leaves a record without its event.
  while (events_.size() < records_.size()) {
    const auto& r = records_[events_.size()];
    MetadataEvent e{r.asset_id, r.operator_name, r.version, events_.size() + 1};
    fsutil::append_line(dir_ / "events.ndjson", canonical_dump(to_json(e)));
    events_.push_back(std::move(e));
  }
}

std::mutex& MetadataStore::pair_mutex(const PairKey& key) {
  std::lock_guard lock(pair_locks_mutex_);
  auto& slot = pair_locks_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::uint32_t MetadataStore::store_metadata(const AssetId& asset_id,
                                            const std::string& operator_name, Json body,
                                            RecordStatus status,
                                            std::optional<ExecutionId> execution_id) {
  if (!assets_.contains(asset_id))
    throw Error(ErrorCode::UnknownAsset, "asset " + asset_id.hex() + " not found");
  if (operator_name.empty()) throw Error(ErrorCode::InvalidInput, "operator name is empty");
  if (status == RecordStatus::Ok && body.is_null())
    throw Error(ErrorCode::InvalidInput, "Ok record requires a body");

  MetadataRecord record;
  record.asset_id = asset_id;
  record.operator_name = operator_name;
  record.execution_id = execution_id;
  record.body = std::move(body);
  record.status = status;
  record.produced_at = options_.clock();

  PairKey key{asset_id, operator_name};
  std::lock_guard pair_lock(pair_mutex(key));
  {
    std::shared_lock read(mutex_);
    auto it = history_.find(key);
    record.version = it == history_.end() ? 1 : records_[it->second.back()].version + 1;
  }
  // Kept in canonical form so a reopened store reads back exactly what was served.
  const std::string canonical_body = canonical_dump(record.body);
  if (canonical_body.size() > options_.max_body_bytes)
    throw Error(ErrorCode::BodyTooLarge, "metadata body exceeds " +
                                             std::to_string(options_.max_body_bytes) + " bytes");
  record.body = Json::parse(canonical_body);

  const std::string line = canonical_dump(to_json(record));
  std::unique_lock write(mutex_);
  MetadataEvent event{asset_id, operator_name, record.version, events_.size() + 1};
  fsutil::append_line(dir_ / "records.ndjson", line);
  fsutil::append_line(dir_ / "events.ndjson", canonical_dump(to_json(event)));
  history_[key].push_back(records_.size());
  records_.push_back(std::move(record));
  events_.push_back(std::move(event));
  const auto version = records_.back().version;
  write.unlock();
  events_cv_.notify_all();
  return version;
}

std::vector<MetadataRecord> MetadataStore::get_metadata(
    const AssetId& asset_id, std::optional<std::string_view> operator_name) const {
  if (!assets_.contains(asset_id))
    throw Error(ErrorCode::UnknownAsset, "asset " + asset_id.hex() + " not found");
  std::shared_lock lock(mutex_);
  std::vector<MetadataRecord> out;
  if (operator_name) {
    auto it = history_.find({asset_id, std::string(*operator_name)});
    if (it == history_.end()) return out;
    for (auto idx : it->second) out.push_back(records_[idx]);
    return out;
  }
  for (auto it = history_.lower_bound({asset_id, std::string()});
       it != history_.end() && it->first.first == asset_id; ++it) {
    out.push_back(records_[it->second.back()]);
  }
  return out;
}

std::optional<MetadataRecord> MetadataStore::find_record(const AssetId& asset_id,
                                                         std::string_view operator_name,
                                                         std::uint32_t version) const {
  std::shared_lock lock(mutex_);
  auto it = history_.find({asset_id, std::string(operator_name)});
  if (it == history_.end() || version == 0 || version > it->second.size()) return std::nullopt;
  return records_[it->second[version - 1]];
}

std::vector<MetadataEvent> MetadataStore::events_after(std::uint64_t sequence) const {
  std::shared_lock lock(mutex_);
  if (sequence >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(sequence), events_.end()};
}

std::uint64_t MetadataStore::last_sequence() const {
  std::shared_lock lock(mutex_);
  return events_.size();
}

std::vector<MetadataRecord> MetadataStore::all_records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

bool MetadataStore::wait_for_events(std::uint64_t sequence,
                                    std::chrono::milliseconds timeout) const {
  std::shared_lock lock(mutex_);
  return events_cv_.wait_for(lock, timeout, [&] { return events_.size() > sequence; });
}

}  // namespace mediaflow
