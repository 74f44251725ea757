#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/clock.hpp"
#include "mediaflow/fair_mutex.hpp"
#include "mediaflow/ids.hpp"

namespace mediaflow {

using Bytes = std::vector<std::uint8_t>;

enum class MediaKind { Image, Video, Audio, Text };

std::string_view to_string(MediaKind kind);
std::optional<MediaKind> parse_media_kind(std::string_view name);

struct MediaAsset {
  AssetId id;
  MediaKind kind = MediaKind::Image;
  std::string name;
  std::uint64_t byte_length = 0;
  Timestamp created_at = 0;
  std::string content_digest;  // sha256, hex
  // Sidecar text consumed by the transcribe stub (Audio, optionally Video).
  std::optional<std::string> transcript;

  bool operator==(const MediaAsset&) const = default;
};

Json to_json(const MediaAsset& asset);
MediaAsset media_asset_from_json(const Json& doc);

struct StoredAsset {
  MediaAsset descriptor;
  Bytes payload;
};

struct AssetFilter {
  std::optional<MediaKind> kind;
  std::optional<Timestamp> created_after;  // exclusive
};

// Published after every successful put. Derived assets (video frames) are
// flagged so upload triggers can ignore them.
struct AssetCreated {
  MediaAsset asset;
  bool derived = false;
};

// Filesystem-backed media store:
//   <root>/assets/<first two hex of id>/<id>.bin   payload
//   <root>/assets/<first two hex of id>/<id>.json  descriptor
class AssetStore {
 public:
  struct Options {
    Clock clock = system_clock();
    std::optional<std::uint64_t> id_seed;
  };

  explicit AssetStore(std::filesystem::path root);
  AssetStore(std::filesystem::path root, Options options);

  AssetStore(const AssetStore&) = delete;
  AssetStore& operator=(const AssetStore&) = delete;

  AssetId put_asset(std::span<const std::uint8_t> payload, MediaKind kind, std::string name,
                    std::optional<std::string> transcript = std::nullopt);

  // Stores an asset whose id is a function of (source, key); repeated calls
  // with the same payload return the existing id without rewriting.
  AssetId put_derived_asset(const AssetId& source, std::uint64_t key,
                            std::span<const std::uint8_t> payload, MediaKind kind,
                            std::string name);

  StoredAsset get_asset(const AssetId& id) const;
  MediaAsset describe(const AssetId& id) const;
  bool contains(const AssetId& id) const;

  // Ordered by (created_at, id).
  std::vector<MediaAsset> list_assets(const AssetFilter& filter = {}) const;

  void subscribe(std::function<void(const AssetCreated&)> listener);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path payload_path(const AssetId& id) const;
  std::filesystem::path descriptor_path(const AssetId& id) const;
  AssetId store(const AssetId& id, std::span<const std::uint8_t> payload, MediaKind kind,
                std::string name, std::optional<std::string> transcript, bool derived);
  void publish(const AssetCreated& event);

  std::filesystem::path root_;
  Options options_;
  IdGenerator ids_;
  mutable FairSharedMutex mutex_;
  std::map<AssetId, MediaAsset> index_;
  std::mutex listeners_mutex_;
  std::vector<std::function<void(const AssetCreated&)>> listeners_;
};

}  // namespace mediaflow
