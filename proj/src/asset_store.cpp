#include "mediaflow/asset_store.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <tuple>

#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/mixing.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

std::string_view to_string(MediaKind kind) {
  switch (kind) {
    case MediaKind::Image: return "Image";
    case MediaKind::Video: return "Video";
    case MediaKind::Audio: return "Audio";
    case MediaKind::Text: return "Text";
  }
  return "Image";
}

std::optional<MediaKind> parse_media_kind(std::string_view name) {
  // Case-insensitive so headers and CLI flags may say "image" or "IMAGE".
  for (auto kind : {MediaKind::Image, MediaKind::Video, MediaKind::Audio, MediaKind::Text}) {
    const auto canonical = to_string(kind);
    if (std::equal(name.begin(), name.end(), canonical.begin(), canonical.end(),
                   [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) ==
                                               std::tolower(static_cast<unsigned char>(b)); }))
      return kind;
  }
  return std::nullopt;
}

Json to_json(const MediaAsset& asset) {
  Json doc = {
      {"id", asset.id.hex()},
      {"kind", to_string(asset.kind)},
      {"name", asset.name},
      {"byte_length", asset.byte_length},
      {"created_at", asset.created_at},
      {"content_digest", asset.content_digest},
  };
  if (asset.transcript) doc["transcript"] = *asset.transcript;
  return doc;
}

MediaAsset media_asset_from_json(const Json& doc) {
  MediaAsset a;
  auto id = AssetId::parse(doc.at("id").get<std::string>());
  auto kind = parse_media_kind(doc.at("kind").get<std::string>());
  if (!id || !kind) throw Error(ErrorCode::StorageFailure, "corrupt asset descriptor");
  a.id = *id;
  a.kind = *kind;
  a.name = doc.at("name").get<std::string>();
  a.byte_length = doc.at("byte_length").get<std::uint64_t>();
  a.created_at = doc.at("created_at").get<Timestamp>();
  a.content_digest = doc.at("content_digest").get<std::string>();
  if (auto it = doc.find("transcript"); it != doc.end() && it->is_string())
    a.transcript = it->get<std::string>();
  return a;
}

AssetStore::AssetStore(fs::path root) : AssetStore(std::move(root), Options{}) {}

AssetStore::AssetStore(fs::path root, Options options)
    : root_(std::move(root)),
      options_(std::move(options)),
      ids_(options_.id_seed ? IdGenerator(*options_.id_seed) : IdGenerator()) {
  std::error_code ec;
  fs::create_directories(root_ / "assets", ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + (root_ / "assets").string());
  for (const auto& entry : fs::recursive_directory_iterator(root_ / "assets")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    auto asset = media_asset_from_json(Json::parse(fsutil::read_text(entry.path())));
    index_.emplace(asset.id, std::move(asset));
  }
}

fs::path AssetStore::payload_path(const AssetId& id) const {
  auto hex = id.hex();
  return root_ / "assets" / hex.substr(0, 2) / (hex + ".bin");
}

fs::path AssetStore::descriptor_path(const AssetId& id) const {
  auto hex = id.hex();
  return root_ / "assets" / hex.substr(0, 2) / (hex + ".json");
}

AssetId AssetStore::put_asset(std::span<const std::uint8_t> payload, MediaKind kind,
                              std::string name, std::optional<std::string> transcript) {
  if (payload.empty()) throw Error(ErrorCode::EmptyPayload, "payload is empty");
  if (name.empty()) throw Error(ErrorCode::InvalidInput, "asset name is empty");
  return store(AssetId(ids_.next()), payload, kind, std::move(name), std::move(transcript), false);
}

AssetId AssetStore::put_derived_asset(const AssetId& source, std::uint64_t key,
                                      std::span<const std::uint8_t> payload, MediaKind kind,
                                      std::string name) {
  if (payload.empty()) throw Error(ErrorCode::EmptyPayload, "payload is empty");
  if (name.empty()) throw Error(ErrorCode::InvalidInput, "asset name is empty");
  const std::uint64_t base = hash_words(source.raw().hi(), {source.raw().lo(), key});
  AssetId id(Id128(hash_words(base, {1}), hash_words(base, {2})));
  {
    std::shared_lock lock(mutex_);
    if (auto it = index_.find(id); it != index_.end()) {
      if (it->second.content_digest == sha256_hex(payload)) return id;
      throw Error(ErrorCode::StorageFailure, "derived asset " + id.hex() + " changed content");
    }
  }
  return store(id, payload, kind, std::move(name), std::nullopt, true);
}

AssetId AssetStore::store(const AssetId& id, std::span<const std::uint8_t> payload, MediaKind kind,
                          std::string name, std::optional<std::string> transcript, bool derived) {
  MediaAsset asset;
  asset.id = id;
  asset.kind = kind;
  asset.name = std::move(name);
  asset.byte_length = payload.size();
  asset.created_at = options_.clock();
  asset.content_digest = sha256_hex(payload);
  asset.transcript = std::move(transcript);

  // Payload first: a visible descriptor always has its bytes in place.
  fsutil::write_atomic(payload_path(id), payload);
  fsutil::write_atomic(descriptor_path(id), canonical_dump(to_json(asset)));
  {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = index_.emplace(id, asset);
    if (!inserted) return id;  // lost a race on an identical derived asset
  }
  publish(AssetCreated{asset, derived});
  return id;
}

void AssetStore::publish(const AssetCreated& event) {
  std::vector<std::function<void(const AssetCreated&)>> listeners;
  {
    std::lock_guard lock(listeners_mutex_);
    listeners = listeners_;
  }
  for (auto& l : listeners) l(event);
}

void AssetStore::subscribe(std::function<void(const AssetCreated&)> listener) {
  std::lock_guard lock(listeners_mutex_);
  listeners_.push_back(std::move(listener));
}

MediaAsset AssetStore::describe(const AssetId& id) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::NotFound, "asset " + id.hex() + " not found");
  return it->second;
}

bool AssetStore::contains(const AssetId& id) const {
  std::shared_lock lock(mutex_);
  return index_.count(id) != 0;
}

StoredAsset AssetStore::get_asset(const AssetId& id) const {
  StoredAsset out{describe(id), {}};
  out.payload = fsutil::read_bytes(payload_path(id));
  if (out.payload.size() != out.descriptor.byte_length)
    throw Error(ErrorCode::StorageFailure, "asset " + id.hex() + " payload length mismatch");
  return out;
}

std::vector<MediaAsset> AssetStore::list_assets(const AssetFilter& filter) const {
  std::vector<MediaAsset> out;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, asset] : index_) {
      if (filter.kind && asset.kind != *filter.kind) continue;
      if (filter.created_after && asset.created_at <= *filter.created_after) continue;
      out.push_back(asset);
    }
  }
  std::sort(out.begin(), out.end(), [](const MediaAsset& a, const MediaAsset& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

}  // namespace mediaflow
