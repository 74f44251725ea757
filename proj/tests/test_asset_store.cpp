#include <doctest.h>

#include <map>
#include <thread>

#include "mediaflow/asset_store.hpp"
#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/image.hpp"
#include "mediaflow/mixing.hpp"
#include "support.hpp"

using namespace mediaflow;

TEST_CASE("put then get round-trips a 64-byte image") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  const auto pgm = encode_image(mftest::pattern_image(7, 7));
  auto payload = pgm;
  payload.resize(64, 0);  // header + 49 pixels + padding reaches 64 bytes
  REQUIRE(payload.size() == 64);

  const auto id = store.put_asset(payload, MediaKind::Image, "dog1.pgm");
  const auto got = store.get_asset(id);
  CHECK(got.payload == payload);
  CHECK(got.descriptor.name == "dog1.pgm");
  CHECK(got.descriptor.kind == MediaKind::Image);
  CHECK(got.descriptor.byte_length == 64);
  CHECK(got.descriptor.content_digest == mftest::sodium_sha256(payload));
}

TEST_CASE("empty payload and empty name are rejected") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  try {
    store.put_asset({}, MediaKind::Image, "x");
    FAIL("expected EmptyPayload");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyPayload);
  }
  const auto b = mftest::bytes_of("x");
  CHECK_THROWS_AS(store.put_asset(b, MediaKind::Text, ""), Error);
  CHECK(store.list_assets().empty());
}

TEST_CASE("identical payloads get distinct ids and equal digests") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  const auto data = mftest::bytes_of("same bytes");
  const auto a = store.put_asset(data, MediaKind::Text, "a.txt");
  const auto b = store.put_asset(data, MediaKind::Text, "b.txt");
  CHECK(a != b);
  const auto expected = mftest::sodium_sha256(data);
  CHECK(store.describe(a).content_digest == expected);
  CHECK(store.describe(b).content_digest == expected);
}

TEST_CASE("unknown id is NotFound") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  try {
    store.get_asset(AssetId(Id128(1, 2)));
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}

TEST_CASE("concurrent puts never cross-talk") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  constexpr int kThreads = 8, kPer = 125;
  std::vector<std::map<AssetId, std::vector<std::uint8_t>>> oracle(kThreads);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < kThreads; ++t)
      threads.emplace_back([&, t] {
        SplitMix rng(static_cast<std::uint64_t>(t) + 100);
        for (int i = 0; i < kPer; ++i) {
          std::vector<std::uint8_t> payload(1 + rng.below(200));
          for (auto& b : payload) b = static_cast<std::uint8_t>(rng.next());
          const auto id = store.put_asset(payload, MediaKind::Text, "p" + std::to_string(i));
          oracle[t].emplace(id, std::move(payload));
          // Interleave reads of earlier puts.
          if (i % 5 == 0) REQUIRE(store.get_asset(oracle[t].begin()->first).payload == oracle[t].begin()->second);
        }
      });
  }
  std::size_t total = 0;
  for (const auto& m : oracle)
    for (const auto& [id, payload] : m) {
      const auto got = store.get_asset(id);
      CHECK(got.payload == payload);
      CHECK(sha256_hex(got.payload) == got.descriptor.content_digest);
      ++total;
    }
  CHECK(total == kThreads * kPer);
  CHECK(store.list_assets().size() == total);
}

TEST_CASE("list_assets filters by kind and exclusive created_after") {
  mftest::TempDir dir;
  mftest::TickClock clock;
  AssetStore store(dir.path(), {clock.fn(), 1});
  CHECK(store.list_assets().empty());
  const auto one = mftest::bytes_of("1");
  for (int i = 0; i < 3; ++i) store.put_asset(one, MediaKind::Image, "img");
  const auto v1 = store.put_asset(one, MediaKind::Video, "v1");
  const auto v2 = store.put_asset(one, MediaKind::Video, "v2");

  const auto videos = store.list_assets({MediaKind::Video, std::nullopt});
  REQUIRE(videos.size() == 2);
  CHECK(videos[0].id == v1);
  CHECK(videos[1].id == v2);

  const auto all = store.list_assets();
  CHECK(all.size() == 5);
  CHECK(std::is_sorted(all.begin(), all.end(), [](const MediaAsset& a, const MediaAsset& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  }));
  CHECK(store.list_assets({std::nullopt, all.back().created_at}).empty());
  CHECK(store.list_assets({std::nullopt, all.front().created_at}).size() == 4);
}

TEST_CASE("store reopens from disk with the same descriptors") {
  mftest::TempDir dir;
  mftest::TickClock clock;
  std::vector<MediaAsset> before;
  {
    AssetStore store(dir.path(), {clock.fn(), std::nullopt});
    store.put_asset(mftest::bytes_of("abc"), MediaKind::Audio, "a.wav", "the dog is limping");
    store.put_asset(mftest::bytes_of("defg"), MediaKind::Text, "b.txt");
    before = store.list_assets();
  }
  AssetStore reopened(dir.path());
  CHECK(reopened.list_assets() == before);
  CHECK(reopened.describe(before[0].id).transcript == std::optional<std::string>("the dog is limping"));

  // On-disk layout: assets/<2 hex>/<id>.bin and .json
  const auto hex = before[1].id.hex();
  const auto json_path = dir.path() / "assets" / hex.substr(0, 2) / (hex + ".json");
  CHECK(fsutil::read_text(dir.path() / "assets" / hex.substr(0, 2) / (hex + ".bin")) == "defg");
  const auto doc = Json::parse(fsutil::read_text(json_path));
  CHECK(doc.at("byte_length") == 4);
  CHECK(doc.at("created_at").is_number_integer());
  CHECK(doc.at("kind") == "Text");
}

TEST_CASE("uploads publish AssetCreated; derived assets are idempotent and flagged") {
  mftest::TempDir dir;
  AssetStore store(dir.path());
  std::vector<AssetCreated> events;
  std::mutex m;
  store.subscribe([&](const AssetCreated& e) {
    std::lock_guard lock(m);
    events.push_back(e);
  });
  const auto src = store.put_asset(mftest::bytes_of("video"), MediaKind::Video, "v");
  const auto frame = mftest::bytes_of("frame");
  const auto f1 = store.put_derived_asset(src, 0, frame, MediaKind::Image, "v#0");
  const auto f2 = store.put_derived_asset(src, 0, frame, MediaKind::Image, "v#0");
  CHECK(f1 == f2);
  REQUIRE(events.size() == 2);
  CHECK_FALSE(events[0].derived);
  CHECK(events[1].derived);
  CHECK(events[1].asset.id == f1);
}

TEST_CASE("media kind names parse case-insensitively") {
  CHECK(parse_media_kind("image") == MediaKind::Image);
  CHECK(parse_media_kind("VIDEO") == MediaKind::Video);
  CHECK_FALSE(parse_media_kind("gif").has_value());
}
