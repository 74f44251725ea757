#pragma once

// Brute-force reference computations. Nothing here calls into the library's
// metric code; only plain data types are shared.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <random>
#include <tuple>
#include <vector>

#include "mediaflow/detection.hpp"
#include "mediaflow/metadata_store.hpp"
#include "mediaflow/search_index.hpp"
#include "mediaflow/vision_dataset.hpp"

namespace oracle {

using mediaflow::BoundingBox;

// Cells of an n x n grid whose centre lies inside [lo, lo + len).
inline long cells_1d(double lo, double len, int n) {
  long count = 0;
  for (int i = 0; i < n; ++i) {
    const double c = (i + 0.5) / n;
    if (c >= lo && c < lo + len) ++count;
  }
  return count;
}

// IoU by counting grid cells; exact for coordinates on the grid.
inline double grid_iou(const BoundingBox& a, const BoundingBox& b, int n = 1000) {
  const long ax = cells_1d(a.left, a.width, n), ay = cells_1d(a.top, a.height, n);
  const long bx = cells_1d(b.left, b.width, n), by = cells_1d(b.top, b.height, n);
  long ix = 0, iy = 0;
  for (int i = 0; i < n; ++i) {
    const double c = (i + 0.5) / n;
    ix += (c >= a.left && c < a.left + a.width && c >= b.left && c < b.left + b.width) ? 1 : 0;
    iy += (c >= a.top && c < a.top + a.height && c >= b.top && c < b.top + b.height) ? 1 : 0;
  }
  const long inter = ix * iy;
  const long uni = ax * ay + bx * by - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct Edge {
  std::size_t pred, gt;
  double iou;
};

// Order in which a greedy matcher would accept edges.
inline bool edge_before(const Edge& x, const Edge& y) {
  if (x.iou != y.iou) return x.iou > y.iou;
  return std::tie(x.pred, x.gt) < std::tie(y.pred, y.gt);
}

// Exhaustive search over every one-to-one assignment (including partial
// ones) using edges with iou >= iou_min and > 0. The winner is the matching
// whose edges, listed in greedy order, come first lexicographically, with a
// longer list beating its own prefix. `iou_of` supplies the pair scores.
template <class IouFn>
std::vector<Edge> best_matching(std::size_t n_pred, std::size_t n_gt, double iou_min, IouFn iou_of) {
  std::vector<std::vector<double>> w(n_pred, std::vector<double>(n_gt));
  for (std::size_t p = 0; p < n_pred; ++p)
    for (std::size_t g = 0; g < n_gt; ++g) w[p][g] = iou_of(p, g);

  auto better = [](std::vector<Edge> a, std::vector<Edge> b) {
    std::sort(a.begin(), a.end(), edge_before);
    std::sort(b.begin(), b.end(), edge_before);
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      if (edge_before(a[i], b[i])) return true;
      if (edge_before(b[i], a[i])) return false;
    }
    return a.size() > b.size();
  };

  std::vector<Edge> best, current;
  std::vector<bool> used(n_gt, false);
  auto rec = [&](auto&& self, std::size_t p) -> void {
    if (p == n_pred) {
      if (better(current, best)) best = current;
      return;
    }
    self(self, p + 1);  // leave p unmatched
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (used[g] || !(w[p][g] >= iou_min && w[p][g] > 0)) continue;
      used[g] = true;
      current.push_back({p, g, w[p][g]});
      self(self, p + 1);
      current.pop_back();
      used[g] = false;
    }
  };
  rec(rec, 0);
  std::sort(best.begin(), best.end(), edge_before);
  return best;
}

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

// Per-label counts at the given thresholds by direct enumeration.
inline std::vector<Counts> count_decisions(const std::vector<mediaflow::ScoredPrediction>& preds,
                                           const mediaflow::LabeledDataset& truth,
                                           const std::vector<double>& thresholds) {
  std::map<std::pair<mediaflow::AssetId, std::size_t>, double> best;
  for (const auto& p : preds) {
    auto [it, fresh] = best.try_emplace({p.asset_id, p.label}, p.confidence);
    if (!fresh) it->second = std::max(it->second, p.confidence);
  }
  std::vector<Counts> out(mediaflow::kLabelCount);
  for (const auto& e : truth.examples)
    for (std::size_t j = 0; j < mediaflow::kLabelCount; ++j) {
      auto it = best.find({e.asset_id, j});
      const bool said = it != best.end() && it->second >= thresholds[j];
      const bool is = e.labels.test(j);
      if (said && is) ++out[j].tp;
      else if (said) ++out[j].fp;
      else if (is) ++out[j].fn;
    }
  return out;
}

// Threshold sweep over k/100 maximizing F1 = 2tp / (2tp + fp + fn). F1 is
// undefined whenever tp == 0 and then loses to any defined value. Returns the
// smallest maximizing grid index per label (0 when nothing is defined).
inline std::vector<int> sweep_thresholds(const std::vector<mediaflow::ScoredPrediction>& preds,
                                         const mediaflow::LabeledDataset& truth) {
  std::vector<int> best_k(mediaflow::kLabelCount, 0);
  std::vector<std::uint64_t> num(mediaflow::kLabelCount, 0), den(mediaflow::kLabelCount, 0);
  for (int k = 0; k <= 100; ++k) {
    const auto counts = count_decisions(preds, truth, std::vector<double>(mediaflow::kLabelCount, k / 100.0));
    for (std::size_t j = 0; j < mediaflow::kLabelCount; ++j) {
      const auto& c = counts[j];
      if (c.tp == 0) continue;
      const std::uint64_t n = 2 * c.tp, d = 2 * c.tp + c.fp + c.fn;
      if (den[j] == 0 || n * den[j] > num[j] * d) {
        best_k[j] = k;
        num[j] = n;
        den[j] = d;
      }
    }
  }
  return best_k;
}

// Random scored corpus: labels drawn independently, scores sometimes snapped
// to the threshold grid so that ties and exact grid hits occur.
inline std::pair<mediaflow::LabeledDataset, std::vector<mediaflow::ScoredPrediction>> random_scored_corpus(
    std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 100);
  mediaflow::LabeledDataset d;
  std::vector<mediaflow::ScoredPrediction> preds;
  const double prevalence = 0.05 + 0.5 * unit(rng);
  for (std::size_t i = 0; i < n; ++i) {
    mediaflow::LabeledExample e;
    e.asset_id = mediaflow::AssetId(mediaflow::Id128(seed, i + 1));
    for (std::size_t j = 0; j < mediaflow::kLabelCount; ++j) {
      if (unit(rng) < prevalence) e.labels.set(j);
      const double r = unit(rng);
      if (r < 0.1) continue;  // no prediction for this pair
      double c = r < 0.4 ? grid(rng) / 100.0 : unit(rng);
      if (e.labels.test(j)) c = std::min(1.0, c + 0.2 * unit(rng));
      preds.push_back({e.asset_id, j, c, std::nullopt});
      if (unit(rng) < 0.1) preds.push_back({e.asset_id, j, unit(rng) * c, std::nullopt});
    }
    d.examples.push_back(std::move(e));
  }
  return {std::move(d), std::move(preds)};
}

// ---- search ------------------------------------------------------------

inline std::string ascii_lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> out(1);
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (word) out.back() += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    else if (!out.back().empty()) out.emplace_back();
  }
  if (out.back().empty()) out.pop_back();
  return out;
}

struct Leaf {
  std::string path;
  const mediaflow::Json* value;
};

inline void leaves(const mediaflow::Json& v, const std::string& path, std::vector<Leaf>& out) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) leaves(*it, path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (v.is_array()) {
    for (const auto& child : v) leaves(child, path, out);
  } else {
    out.push_back({path, &v});
  }
}

// Brute-force evaluation of a query against every committed record.
inline std::vector<mediaflow::SearchHit> scan_search(const std::vector<mediaflow::MetadataRecord>& records,
                                                     const mediaflow::Query& q) {
  using mediaflow::Json;
  std::map<std::pair<mediaflow::AssetId, std::string>, std::uint32_t> latest;
  for (const auto& r : records) {
    auto& v = latest[{r.asset_id, r.operator_name}];
    v = std::max(v, r.version);
  }
  std::vector<mediaflow::SearchHit> hits;
  for (const auto& r : records) {
    if (!q.include_history && latest[{r.asset_id, r.operator_name}] != r.version) continue;
    std::vector<Leaf> ls;
    leaves(r.body, "", ls);
    const std::string status = r.status == mediaflow::RecordStatus::Ok ? "ok" : "failed";

    bool ok = true;
    for (const auto& t : q.term_filters) {
      const auto want = ascii_lower(t.term);
      bool found = false;
      if (t.field == "@asset_id") found = r.asset_id.hex() == want;
      else if (t.field == "@operator") found = ascii_lower(r.operator_name) == want;
      else if (t.field == "@status") found = status == want;
      for (const auto& l : ls) {
        if (l.path != t.field) continue;
        if (l.value->is_string() && ascii_lower(l.value->get<std::string>()) == want) found = true;
        if (l.value->is_boolean() && (l.value->get<bool>() ? "true" : "false") == want) found = true;
      }
      ok = ok && found;
    }
    for (const auto& f : q.range_filters) {
      std::vector<double> values;
      if (f.field == "@version") values.push_back(r.version);
      if (f.field == "@timestamp") values.push_back(static_cast<double>(r.produced_at));
      for (const auto& l : ls)
        if (l.path == f.field && l.value->is_number()) values.push_back(l.value->get<double>());
      bool found = false;
      for (double v : values) found = found || ((!f.min || v >= *f.min) && (!f.max || v <= *f.max));
      ok = ok && found;
    }
    std::map<std::string, int> tf;
    for (const auto& l : ls)
      if (l.value->is_string())
        for (const auto& w : words_of(l.value->get<std::string>())) ++tf[w];
    double score = q.free_text.empty() ? 1.0 : 0.0;
    for (const auto& token : q.free_text) {
      auto it = tf.find(ascii_lower(token));
      if (it == tf.end()) ok = false;
      else score += it->second;
    }
    if (ok) hits.push_back({{r.asset_id, r.operator_name, r.version}, score, r.produced_at});
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(-a.score, -a.timestamp, a.doc) < std::make_tuple(-b.score, -b.timestamp, b.doc);
  });
  if (hits.size() > q.limit) hits.resize(q.limit);
  return hits;
}

}  // namespace oracle
