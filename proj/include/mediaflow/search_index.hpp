#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/fair_mutex.hpp"
#include "mediaflow/metadata_store.hpp"

namespace mediaflow {

struct DocId {
  AssetId asset_id;
  std::string operator_name;
  std::uint32_t version = 0;

  auto operator<=>(const DocId&) const = default;
};

Json to_json(const DocId& id);

// Lowercase, split on non-alphanumeric ASCII; bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text);

// Reserved document-level fields available to filters.
inline constexpr std::string_view kAssetField = "@asset_id";
inline constexpr std::string_view kOperatorField = "@operator";
inline constexpr std::string_view kStatusField = "@status";
inline constexpr std::string_view kVersionField = "@version";
inline constexpr std::string_view kTimestampField = "@timestamp";

// A metadata record as the index sees it. Body paths join object keys with
// '.', arrays contribute their elements under the array's own path.
struct IndexedDocument {
  DocId id;
  Timestamp timestamp = 0;
  std::map<std::string, std::set<std::string>> keywords;  // path -> lowercased whole values
  std::map<std::string, std::vector<double>> numeric_fields;
  std::map<std::string, std::uint32_t> terms;  // token -> frequency over body strings
  bool malformed = false;

  bool operator==(const IndexedDocument&) const = default;
};

IndexedDocument make_document(const MetadataRecord& record);
Json to_json(const IndexedDocument& doc);

struct TermFilter {
  std::string field;
  std::string term;  // compared lowercased against whole values
};

struct RangeFilter {
  std::string field;
  std::optional<double> min;  // inclusive
  std::optional<double> max;  // inclusive
};

struct Query {
  std::vector<TermFilter> term_filters;
  std::vector<RangeFilter> range_filters;
  std::vector<std::string> free_text;  // every token must occur
  std::size_t limit = 100;
  bool include_history = false;

  bool empty() const { return term_filters.empty() && range_filters.empty() && free_text.empty(); }
};

struct SearchHit {
  DocId doc;
  double score = 0;
  Timestamp timestamp = 0;

  bool operator==(const SearchHit&) const = default;
};

Json to_json(const SearchHit& hit);
Json to_json(const std::vector<SearchHit>& hits);

// Event-driven inverted index over metadata records. The metadata event log
// is the source of truth; <root>/search holds a snapshot and a checkpoint.
class SearchIndex {
 public:
  SearchIndex(std::filesystem::path root, const MetadataStore& metadata);

  SearchIndex(const SearchIndex&) = delete;
  SearchIndex& operator=(const SearchIndex&) = delete;

  // Indexes every event with sequence > from_sequence; returns how many were processed.
  std::size_t consume_events(std::uint64_t from_sequence);
  // consume_events(checkpoint()).
  std::size_t consume_pending();
  std::uint64_t checkpoint() const;

  // Matches all clauses; ordered by (score desc, timestamp desc, doc id asc).
  // Throws EmptyQuery.
  std::vector<SearchHit> query(const Query& q) const;

  // Canonical dump of every document, ordered by doc id.
  Json dump() const;
  std::size_t size() const;
  std::size_t malformed_count() const;

 private:
  void index_document(IndexedDocument doc);
  void unindex(const DocId& id);
  void save_locked() const;
  bool matches(const IndexedDocument& doc, const Query& q) const;

  std::filesystem::path dir_;
  const MetadataStore& metadata_;

  std::mutex writer_mutex_;
  mutable FairSharedMutex mutex_;
  std::uint64_t checkpoint_ = 0;
  std::size_t missing_records_ = 0;
  std::map<DocId, IndexedDocument> docs_;
  std::map<std::pair<std::string, std::string>, std::set<DocId>> keyword_postings_;
  std::map<std::string, std::set<DocId>> token_postings_;
  std::map<std::string, std::multimap<double, DocId>> numeric_postings_;
  std::map<std::pair<AssetId, std::string>, std::uint32_t> latest_;
};

}  // namespace mediaflow
