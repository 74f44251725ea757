#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/search_index.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mediaflow;

namespace {

const std::vector<std::string> kVocabulary = {"limp", "limping", "swollen", "paw", "Cough", "eye", "red", "itchy",
                                              "tooth", "gums", "vomit", "calm"};

struct Corpus {
  mftest::TempDir dir;
  std::atomic<Timestamp> ticks{0};
  AssetStore assets{dir.path(), {[this] { return Timestamp{1'000} + ticks++ / 3; }, 4}};
  MetadataStore metadata{dir.path(), assets, {[this] { return Timestamp{1'000} + ticks++ / 3; }, MetadataStore::kMaxBodyBytes}};
  std::vector<AssetId> ids;

  explicit Corpus(std::size_t n_assets) {
    for (std::size_t i = 0; i < n_assets; ++i)
      ids.push_back(assets.put_asset(mftest::bytes_of("asset" + std::to_string(i)), MediaKind::Image, "a"));
  }

  void random_records(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> asset(0, ids.size() - 1), word(0, kVocabulary.size() - 1);
    std::uniform_int_distribution<int> op(0, 2), count(0, 4);
    std::uniform_real_distribution<double> unit(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = ids[asset(rng)];
      const int kind = op(rng);
      Json body;
      std::string name;
      if (kind == 0) {
        name = "detect_labels";
        Json labels = Json::object();
        for (std::size_t j = 0; j < kLabelCount; ++j)
          if (unit(rng) < 0.4) {
            const double c = std::round(unit(rng) * 1000) / 1000;
            labels[std::string(kConditionLabels[j])] = {{"confidence", c}, {"present", c >= 0.5}};
          }
        body = {{"labels", labels}, {"model_seed", 7}};
      } else if (kind == 1) {
        name = "key_phrases";
        Json phrases = Json::array();
        for (int k = count(rng); k > 0; --k) phrases.push_back({{"phrase", kVocabulary[word(rng)]}, {"score", unit(rng)}});
        body = {{"key_phrases", phrases}, {"source", "transcript"}};
      } else {
        name = "notes";
        std::string text;
        for (int k = count(rng) + 1; k > 0; --k) text += kVocabulary[word(rng)] + (k % 2 ? ", " : " ");
        body = {{"text", text}, {"category", unit(rng) < 0.5 ? "Clinic" : "home"}};
      }
      metadata.store_metadata(a, name, body, unit(rng) < 0.1 ? RecordStatus::Failed : RecordStatus::Ok);
    }
  }
};

Query random_query(std::mt19937_64& rng, const Corpus& c) {
  std::uniform_real_distribution<double> unit(0, 1);
  std::uniform_int_distribution<std::size_t> label(0, kLabelCount - 1), word(0, kVocabulary.size() - 1),
      asset(0, c.ids.size() - 1);
  Query q;
  do {
    const std::string l(kConditionLabels[label(rng)]);
    if (unit(rng) < 0.3) q.term_filters.push_back({"labels." + l + ".present", unit(rng) < 0.7 ? "true" : "false"});
    if (unit(rng) < 0.3) {
      const double lo = std::round(unit(rng) * 100) / 100;
      q.range_filters.push_back({"labels." + l + ".confidence", lo, unit(rng) < 0.5 ? std::optional<double>() : lo + 0.3});
    }
    if (unit(rng) < 0.3) q.free_text.push_back(kVocabulary[word(rng)]);
    if (unit(rng) < 0.15) q.term_filters.push_back({"@operator", unit(rng) < 0.5 ? "notes" : "Detect_Labels"});
    if (unit(rng) < 0.1) q.term_filters.push_back({"@status", "failed"});
    if (unit(rng) < 0.1) q.term_filters.push_back({"category", "CLINIC"});
    if (unit(rng) < 0.1) q.term_filters.push_back({"key_phrases.phrase", kVocabulary[word(rng)]});
    if (unit(rng) < 0.1) q.term_filters.push_back({"@asset_id", c.ids[asset(rng)].hex()});
    if (unit(rng) < 0.1) q.range_filters.push_back({"@timestamp", 1'000 + unit(rng) * 600, std::nullopt});
  } while (q.empty());
  q.include_history = unit(rng) < 0.3;
  q.limit = unit(rng) < 0.5 ? 100 : 1 + static_cast<std::size_t>(unit(rng) * 20);
  return q;
}

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Limping, left-hind PAW!") == std::vector<std::string>{"limping", "left", "hind", "paw"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("caf\xc3\xa9 ok") == std::vector<std::string>{"caf\xc3\xa9", "ok"});
}

TEST_CASE("empty index") {
  mftest::TempDir dir;
  AssetStore assets(dir.path());
  MetadataStore metadata(dir.path(), assets);
  SearchIndex index(dir.path(), metadata);
  CHECK(index.consume_pending() == 0);
  Query q;
  q.free_text = {"limp"};
  CHECK(index.query(q).empty());
  try {
    index.query(Query{});
    FAIL("expected EmptyQuery");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyQuery);
  }
  q.limit = 0;
  CHECK_THROWS_AS(index.query(q), Error);
}

TEST_CASE("ten records are consumed and queryable") {
  Corpus c(5);
  c.random_records(10, 1);
  SearchIndex index(c.dir.path(), c.metadata);
  CHECK(index.consume_pending() == 10);
  CHECK(index.checkpoint() == 10);
  CHECK(index.consume_pending() == 0);
  for (const auto& r : c.metadata.all_records()) {
    Query q;
    q.term_filters = {{"@asset_id", r.asset_id.hex()}, {"@operator", r.operator_name}};
    q.range_filters = {{"@version", r.version, r.version}};
    q.include_history = true;
    auto hits = index.query(q);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].doc == DocId{r.asset_id, r.operator_name, r.version});
  }
}

TEST_CASE("seven of fifty limping") {
  Corpus c(50);
  for (std::size_t i = 0; i < 50; ++i) {
    const bool limping = i % 7 == 3;
    const double conf = limping ? 0.75 + 0.01 * static_cast<double>(i % 20) : 0.1 + 0.01 * static_cast<double>(i);
    c.metadata.store_metadata(c.ids[i], "detect_labels",
                              {{"labels", {{"limping", {{"confidence", conf}, {"present", limping}}}}}}, RecordStatus::Ok);
  }
  SearchIndex index(c.dir.path(), c.metadata);
  index.consume_pending();
  Query q;
  q.term_filters = {{"labels.limping.present", "true"}};
  auto hits = index.query(q);
  CHECK(hits.size() == 7);
  CHECK(hits == oracle::scan_search(c.metadata.all_records(), q));
  for (const auto& h : hits) CHECK(h.score == 1.0);

  Query r;
  r.range_filters = {{"labels.limping.confidence", 0.75, 1.0}};
  auto ranged = index.query(r);
  CHECK(ranged == oracle::scan_search(c.metadata.all_records(), r));
  CHECK(ranged.size() == 7 + 0);
}

TEST_CASE("random queries equal the linear scan") {
  Corpus c(120);
  c.random_records(1000, 42);
  SearchIndex index(c.dir.path(), c.metadata);
  CHECK(index.consume_pending() == 1000);
  const auto records = c.metadata.all_records();
  std::mt19937_64 rng(7);
  std::size_t nonempty = 0;
  for (int i = 0; i < 200; ++i) {
    auto q = random_query(rng, c);
    auto got = index.query(q);
    auto want = oracle::scan_search(records, q);
    CHECK(got == want);
    nonempty += !want.empty();
  }
  CHECK(nonempty > 50);
}

TEST_CASE("history flag exposes older versions") {
  Corpus c(1);
  c.metadata.store_metadata(c.ids[0], "notes", {{"text", "limp"}}, RecordStatus::Ok);
  c.metadata.store_metadata(c.ids[0], "notes", {{"text", "calm"}}, RecordStatus::Ok);
  SearchIndex index(c.dir.path(), c.metadata);
  index.consume_pending();
  Query q;
  q.free_text = {"limp"};
  CHECK(index.query(q).empty());
  q.include_history = true;
  auto hits = index.query(q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].doc.version == 1);
}

TEST_CASE("replay and re-consumption are idempotent") {
  Corpus c(30);
  c.random_records(300, 3);
  SearchIndex index(c.dir.path(), c.metadata);
  index.consume_pending();
  const auto before = canonical_dump(index.dump());
  CHECK(index.consume_events(0) == 300);
  CHECK(canonical_dump(index.dump()) == before);
  CHECK(index.consume_events(150) == 150);
  CHECK(canonical_dump(index.dump()) == before);
  CHECK(index.size() == 300);
}

TEST_CASE("snapshot reload and incremental catch-up") {
  Corpus c(20);
  c.random_records(100, 5);
  std::string first;
  {
    SearchIndex index(c.dir.path(), c.metadata);
    index.consume_pending();
    first = canonical_dump(index.dump());
  }
  {
    SearchIndex index(c.dir.path(), c.metadata);
    CHECK(index.checkpoint() == 100);
    CHECK(canonical_dump(index.dump()) == first);
    CHECK(fsutil::read_text(c.dir.path() / "search" / "checkpoint.json") == "{\"sequence\":100}");
  }
  c.random_records(25, 6);
  SearchIndex index(c.dir.path(), c.metadata);
  CHECK(index.consume_pending() == 25);
  SearchIndex fresh_dir_index(c.dir.path(), c.metadata);
  CHECK(canonical_dump(fresh_dir_index.dump()) == canonical_dump(index.dump()));
}

TEST_CASE("malformed bodies are flagged but salvaged") {
  Corpus c(2);
  c.metadata.store_metadata(c.ids[0], "odd", Json("Swollen paw"), RecordStatus::Ok);
  c.metadata.store_metadata(c.ids[1], "odd", Json::array({"itchy", 3}), RecordStatus::Ok);
  SearchIndex index(c.dir.path(), c.metadata);
  index.consume_pending();
  CHECK(index.malformed_count() == 2);
  Query q;
  q.free_text = {"paw"};
  CHECK(index.query(q).size() == 1);
  q.free_text = {"itchy"};
  CHECK(index.query(q).size() == 1);
}

TEST_CASE("free text scores by term frequency") {
  Corpus c(3);
  c.metadata.store_metadata(c.ids[0], "notes", {{"text", "limp limp paw"}}, RecordStatus::Ok);
  c.metadata.store_metadata(c.ids[1], "notes", {{"text", "limp"}}, RecordStatus::Ok);
  c.metadata.store_metadata(c.ids[2], "notes", {{"text", "Limp, LIMP, limp"}, {"more", {"paw"}}}, RecordStatus::Ok);
  SearchIndex index(c.dir.path(), c.metadata);
  index.consume_pending();
  Query q;
  q.free_text = {"LIMP", "paw"};
  auto hits = index.query(q);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].doc.asset_id == c.ids[2]);
  CHECK(hits[0].score == 4.0);
  CHECK(hits[1].score == 3.0);
  q.limit = 1;
  CHECK(index.query(q).size() == 1);
}

TEST_CASE("readers run alongside the consumer") {
  Corpus c(40);
  c.random_records(400, 9);
  SearchIndex index(c.dir.path(), c.metadata);
  std::atomic<bool> stop{false};
  std::atomic<std::size_t> queries{0};
  std::vector<std::jthread> readers;
  for (int t = 0; t < 3; ++t)
    readers.emplace_back([&] {
      Query q;
      q.term_filters = {{"@operator", "notes"}};
      q.include_history = true;
      q.limit = 1000;
      std::size_t last = 0;
      while (!stop) {
        const auto n = index.query(q).size();
        CHECK(n >= last);
        last = n;
        ++queries;
      }
    });
  for (std::uint64_t from = 0; from < 400; from += 40) index.consume_events(from);
  stop = true;
  readers.clear();
  CHECK(index.size() == 400);
  CHECK(queries > 0);
}
