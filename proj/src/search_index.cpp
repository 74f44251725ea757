#include "mediaflow/search_index.hpp"

#include <algorithm>
#include <cctype>

#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"

namespace mediaflow {

namespace fs = std::filesystem;

Json to_json(const DocId& id) {
  return Json{{"asset_id", id.asset_id.hex()}, {"operator", id.operator_name}, {"version", id.version}};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string token;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!token.empty()) {
      out.push_back(std::move(token));
      token.clear();
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void flatten(const Json& v, const std::string& path, IndexedDocument& doc) {
  switch (v.type()) {
    case Json::value_t::object:
      for (const auto& [key, child] : v.items()) flatten(child, path.empty() ? key : path + "." + key, doc);
      break;
    case Json::value_t::array:
      for (const auto& child : v) flatten(child, path, doc);
      break;
    case Json::value_t::string: {
      const auto& s = v.get_ref<const std::string&>();
      doc.keywords[path].insert(lowercase(s));
      for (auto& t : tokenize(s)) ++doc.terms[t];
      break;
    }
    case Json::value_t::boolean:
      doc.keywords[path].insert(v.get<bool>() ? "true" : "false");
      break;
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
    case Json::value_t::number_float:
      doc.numeric_fields[path].push_back(v.get<double>());
      break;
    default:
      break;
  }
}

IndexedDocument document_from_json(const Json& j) {
  IndexedDocument d;
  d.id.asset_id = AssetId::parse(j.at("asset_id").get<std::string>()).value();
  d.id.operator_name = j.at("operator").get<std::string>();
  d.id.version = j.at("version").get<std::uint32_t>();
  d.timestamp = j.at("timestamp").get<Timestamp>();
  d.keywords = j.at("keywords").get<std::map<std::string, std::set<std::string>>>();
  d.numeric_fields = j.at("numeric").get<std::map<std::string, std::vector<double>>>();
  d.terms = j.at("terms").get<std::map<std::string, std::uint32_t>>();
  d.malformed = j.at("malformed").get<bool>();
  return d;
}

}  // namespace

IndexedDocument make_document(const MetadataRecord& record) {
  IndexedDocument doc;
  doc.id = {record.asset_id, record.operator_name, record.version};
  doc.timestamp = record.produced_at;
  if (!record.body.is_object()) doc.malformed = true;
  flatten(record.body, "", doc);
  if (doc.keywords.count("")) doc.malformed = true;  // scalar body salvaged under the empty path
  doc.keywords[std::string(kAssetField)] = {record.asset_id.hex()};
  doc.keywords[std::string(kOperatorField)] = {lowercase(record.operator_name)};
  doc.keywords[std::string(kStatusField)] = {lowercase(to_string(record.status))};
  doc.numeric_fields[std::string(kVersionField)] = {static_cast<double>(record.version)};
  doc.numeric_fields[std::string(kTimestampField)] = {static_cast<double>(record.produced_at)};
  return doc;
}

Json to_json(const IndexedDocument& d) {
  return Json{{"asset_id", d.id.asset_id.hex()},
              {"operator", d.id.operator_name},
              {"version", d.id.version},
              {"timestamp", d.timestamp},
              {"keywords", d.keywords},
              {"numeric", d.numeric_fields},
              {"terms", d.terms},
              {"malformed", d.malformed}};
}

Json to_json(const SearchHit& hit) {
  Json j = to_json(hit.doc);
  j["score"] = hit.score;
  j["timestamp"] = hit.timestamp;
  return j;
}

Json to_json(const std::vector<SearchHit>& hits) {
  Json arr = Json::array();
  for (const auto& h : hits) arr.push_back(to_json(h));
  return Json{{"hits", std::move(arr)}, {"count", hits.size()}};
}

SearchIndex::SearchIndex(fs::path root, const MetadataStore& metadata)
    : dir_(std::move(root) / "search"), metadata_(metadata) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir_.string());
  if (fs::exists(dir_ / "checkpoint.json") && fs::exists(dir_ / "snapshot.json")) {
    const auto cp = Json::parse(fsutil::read_text(dir_ / "checkpoint.json"));
    const auto snap = Json::parse(fsutil::read_text(dir_ / "snapshot.json"));
    if (snap.value("sequence", std::uint64_t{0}) == cp.at("sequence").get<std::uint64_t>()) {
      for (const auto& d : snap.at("documents")) index_document(document_from_json(d));
      checkpoint_ = cp.at("sequence").get<std::uint64_t>();
      missing_records_ = snap.value("missing_records", std::size_t{0});
    }
  }
}

void SearchIndex::unindex(const DocId& id) {
  auto it = docs_.find(id);
  if (it == docs_.end()) return;
  const auto& doc = it->second;
  for (const auto& [path, values] : doc.keywords)
    for (const auto& v : values) {
      auto p = keyword_postings_.find({path, v});
      p->second.erase(id);
      if (p->second.empty()) keyword_postings_.erase(p);
    }
  for (const auto& [token, _] : doc.terms) {
    auto p = token_postings_.find(token);
    p->second.erase(id);
    if (p->second.empty()) token_postings_.erase(p);
  }
  for (const auto& [path, values] : doc.numeric_fields) {
    auto& mm = numeric_postings_[path];
    for (auto e = mm.begin(); e != mm.end();) e = e->second == id ? mm.erase(e) : std::next(e);
  }
  docs_.erase(it);
}

void SearchIndex::index_document(IndexedDocument doc) {
  const DocId id = doc.id;
  unindex(id);
  for (const auto& [path, values] : doc.keywords)
    for (const auto& v : values) keyword_postings_[{path, v}].insert(id);
  for (const auto& [token, _] : doc.terms) token_postings_[token].insert(id);
  for (const auto& [path, values] : doc.numeric_fields)
    for (double v : values) numeric_postings_[path].emplace(v, id);
  auto& latest = latest_[{id.asset_id, id.operator_name}];
  latest = std::max(latest, id.version);
  docs_.emplace(id, std::move(doc));
}

std::size_t SearchIndex::consume_events(std::uint64_t from_sequence) {
  std::lock_guard writer(writer_mutex_);
  const auto events = metadata_.events_after(from_sequence);
  std::vector<IndexedDocument> batch;
  std::size_t missing = 0;
  for (const auto& e : events) {
    auto record = metadata_.find_record(e.asset_id, e.operator_name, e.version);
    if (!record) {
      ++missing;
      continue;
    }
    batch.push_back(make_document(*record));
  }
  if (events.empty()) return 0;
  {
    std::unique_lock lock(mutex_);
    for (auto& d : batch) index_document(std::move(d));
    missing_records_ += missing;
    checkpoint_ = std::max(checkpoint_, events.back().sequence);
  }
  // writer_mutex_ keeps the state stable while readers continue.
  std::shared_lock lock(mutex_);
  save_locked();
  return events.size();
}

std::size_t SearchIndex::consume_pending() { return consume_events(checkpoint()); }

std::uint64_t SearchIndex::checkpoint() const {
  std::shared_lock lock(mutex_);
  return checkpoint_;
}

void SearchIndex::save_locked() const {
  Json docs = Json::array();
  for (const auto& [id, d] : docs_) docs.push_back(to_json(d));
  // Full-precision dump: the snapshot must reload to an identical index.
  fsutil::write_atomic(dir_ / "snapshot.json",
                       Json{{"sequence", checkpoint_}, {"missing_records", missing_records_}, {"documents", docs}}.dump());
  fsutil::write_atomic(dir_ / "checkpoint.json", canonical_dump(Json{{"sequence", checkpoint_}}));
}

bool SearchIndex::matches(const IndexedDocument& doc, const Query& q) const {
  if (!q.include_history) {
    auto it = latest_.find({doc.id.asset_id, doc.id.operator_name});
    if (it == latest_.end() || it->second != doc.id.version) return false;
  }
  for (const auto& t : q.term_filters) {
    auto it = doc.keywords.find(t.field);
    if (it == doc.keywords.end() || !it->second.count(lowercase(t.term))) return false;
  }
  for (const auto& r : q.range_filters) {
    auto it = doc.numeric_fields.find(r.field);
    if (it == doc.numeric_fields.end()) return false;
    const bool any = std::any_of(it->second.begin(), it->second.end(), [&](double v) {
      return (!r.min || v >= *r.min) && (!r.max || v <= *r.max);
    });
    if (!any) return false;
  }
  for (const auto& token : q.free_text)
    if (!doc.terms.count(token)) return false;
  return true;
}

std::vector<SearchHit> SearchIndex::query(const Query& q) const {
  if (q.empty()) throw Error(ErrorCode::EmptyQuery, "query has no clauses");
  if (q.limit == 0) throw Error(ErrorCode::InvalidInput, "limit must be positive");
  Query norm = q;
  for (auto& t : norm.free_text) t = lowercase(t);

  std::shared_lock lock(mutex_);
  // Seed candidates from the most selective posting list available.
  const std::set<DocId>* seed = nullptr;
  static const std::set<DocId> kEmpty;
  auto consider = [&](const std::set<DocId>* list) {
    if (!seed || list->size() < seed->size()) seed = list;
  };
  for (const auto& t : norm.term_filters) {
    auto it = keyword_postings_.find({t.field, lowercase(t.term)});
    consider(it == keyword_postings_.end() ? &kEmpty : &it->second);
  }
  for (const auto& token : norm.free_text) {
    auto it = token_postings_.find(token);
    consider(it == token_postings_.end() ? &kEmpty : &it->second);
  }
  std::set<DocId> from_range;
  if (!seed) {
    const auto& r = norm.range_filters.front();
    if (auto it = numeric_postings_.find(r.field); it != numeric_postings_.end()) {
      auto lo = r.min ? it->second.lower_bound(*r.min) : it->second.begin();
      auto hi = r.max ? it->second.upper_bound(*r.max) : it->second.end();
      for (auto e = lo; e != hi; ++e) from_range.insert(e->second);
    }
    seed = &from_range;
  }

  std::vector<SearchHit> hits;
  for (const auto& id : *seed) {
    const auto& doc = docs_.at(id);
    if (!matches(doc, norm)) continue;
    double score = 1.0;
    if (!norm.free_text.empty()) {
      score = 0;
      for (const auto& token : norm.free_text) score += doc.terms.at(token);
    }
    hits.push_back({id, score, doc.timestamp});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    return a.doc < b.doc;
  });
  if (hits.size() > norm.limit) hits.resize(norm.limit);
  return hits;
}

Json SearchIndex::dump() const {
  std::shared_lock lock(mutex_);
  Json docs = Json::array();
  for (const auto& [id, d] : docs_) docs.push_back(to_json(d));
  return docs;
}

std::size_t SearchIndex::size() const {
  std::shared_lock lock(mutex_);
  return docs_.size();
}

std::size_t SearchIndex::malformed_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = missing_records_;
  for (const auto& [id, d] : docs_) n += d.malformed ? 1 : 0;
  return n;
}

}  // namespace mediaflow
