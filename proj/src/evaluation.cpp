#include "mediaflow/evaluation.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "mediaflow/error.hpp"

namespace mediaflow {

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
  if (!precision || !recall || *precision + *recall == 0) return std::nullopt;
  return 2 * *precision * *recall / (*precision + *recall);
}

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
  PrecisionRecallF1 out;
  if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) throw Error(ErrorCode::DegenerateBox, "iou of an invalid box");
  const double ar = a.left + a.width, ab = a.top + a.height;
  const double br = b.left + b.width, bb = b.top + b.height;
  const double iw = std::min(ar, br) - std::max(a.left, b.left);
  const double ih = std::min(ab, bb) - std::max(a.top, b.top);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  // areas from the same edges as the intersection, so iou(a, a) == 1 exactly
  const double uni = (ar - a.left) * (ab - a.top) + (br - b.left) * (bb - b.top) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_detections(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                             double iou_min) {
  std::vector<BoxMatch> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p)
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (double v = iou(preds[p], gts[g]); v >= iou_min && v > 0) candidates.push_back({p, g, v});
  std::sort(candidates.begin(), candidates.end(), [](const BoxMatch& a, const BoxMatch& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  MatchResult out;
  std::vector<bool> pred_used(preds.size()), gt_used(gts.size());
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    out.matches.push_back(c);
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_used[p]) out.unmatched_preds.push_back(p);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_used[g]) out.unmatched_gts.push_back(g);
  return out;
}

namespace {

constexpr double kNoScore = -1.0;

struct ScoredBox {
  double confidence;
  BoundingBox box;
};

// Predictions regrouped per (example, label).
struct ScoreTable {
  std::vector<std::array<double, kLabelCount>> max_conf;
  std::vector<std::array<std::vector<ScoredBox>, kLabelCount>> boxes;
};

ScoreTable tabulate(std::span<const ScoredPrediction> preds, const LabeledDataset& truth) {
  std::unordered_map<AssetId, std::size_t> index;
  index.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (!index.emplace(truth.examples[i].asset_id, i).second)
      throw Error(ErrorCode::InvalidInput,
                  "asset " + truth.examples[i].asset_id.hex() + " appears twice in the dataset");
  ScoreTable t;
  t.max_conf.assign(truth.size(), {});
  for (auto& row : t.max_conf) row.fill(kNoScore);
  t.boxes.resize(truth.size());
  for (const auto& p : preds) {
    auto it = index.find(p.asset_id);
    if (it == index.end())
      throw Error(ErrorCode::UnknownAsset, "prediction for asset " + p.asset_id.hex() + " not in dataset");
    auto& m = t.max_conf[it->second][p.label];
    m = std::max(m, p.confidence);
    if (p.box) t.boxes[it->second][p.label].push_back({p.confidence, *p.box});
  }
  return t;
}

struct ExampleOutcome {
  std::array<ConfusionCounts, kLabelCount> counts{};
  std::array<std::vector<double>, kLabelCount> ious;
};

ExampleOutcome score_example(const LabeledExample& e, const std::array<double, kLabelCount>& max_conf,
                             const std::array<std::vector<ScoredBox>, kLabelCount>& pred_boxes,
                             const Thresholds& thresholds, double iou_min) {
  ExampleOutcome out;
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const bool predicted = max_conf[j] != kNoScore && max_conf[j] >= thresholds[j];
    const bool actual = e.labels.test(j);
    if (predicted && actual) {
      ++out.counts[j].tp;
      auto gt = e.boxes.find(j);
      if (gt == e.boxes.end() || gt->second.empty()) continue;
      std::vector<BoundingBox> kept;
      for (const auto& sb : pred_boxes[j])
        if (sb.confidence >= thresholds[j]) kept.push_back(sb.box);
      for (const auto& m : match_detections(kept, gt->second, iou_min).matches)
        out.ious[j].push_back(m.iou);
    } else if (predicted) {
      ++out.counts[j].fp;
    } else if (actual) {
      ++out.counts[j].fn;
    }
  }
  return out;
}

MetricsReport finish_report(const std::array<ConfusionCounts, kLabelCount>& counts,
                            const std::array<std::vector<double>, kLabelCount>& ious,
                            const LabeledDataset& truth, const Thresholds& thresholds) {
  MetricsReport r;
  r.dataset_digest = dataset_digest(truth);
  std::array<double, 4> sums{};
  std::array<int, 4> defined{};
  auto accumulate = [&](int slot, const std::optional<double>& v) {
    if (!v) return;
    sums[slot] += *v;
    ++defined[slot];
  };
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    auto& m = r.labels[j];
    m.counts = counts[j];
    auto prf = precision_recall_f1(counts[j]);
    m.precision = prf.precision;
    m.recall = prf.recall;
    m.f1 = prf.f1;
    if (!ious[j].empty())
      m.mean_iou = std::accumulate(ious[j].begin(), ious[j].end(), 0.0) / static_cast<double>(ious[j].size());
    m.assumed_threshold = thresholds[j];
    accumulate(0, m.precision);
    accumulate(1, m.recall);
    accumulate(2, m.f1);
    accumulate(3, m.mean_iou);
  }
  auto mean = [&](int slot) -> std::optional<double> {
    if (defined[slot] == 0) return std::nullopt;
    return sums[slot] / defined[slot];
  };
  r.macro = {mean(0), mean(1), mean(2), mean(3)};
  return r;
}

// Exact comparison of 2tp / (2tp + fp + fn) between two grid points.
struct F1Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;
  bool defined = false;
};

F1Ratio f1_ratio(std::uint64_t tp, std::uint64_t fp, std::uint64_t positives) {
  // Undefined when precision (tp+fp == 0), recall (no positives) or P+R (tp == 0) is.
  if (tp == 0 || positives == 0) return {};
  return {2 * tp, 2 * tp + fp + (positives - tp), true};
}

bool better(const F1Ratio& a, const F1Ratio& b) {
  if (!a.defined) return false;
  if (!b.defined) return true;
  return static_cast<unsigned __int128>(a.num) * b.den > static_cast<unsigned __int128>(b.num) * a.den;
}

Thresholds pick_best(const std::array<std::array<F1Ratio, kThresholdSteps + 1>, kLabelCount>& f1) {
  Thresholds out{};
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    std::size_t best = 0;
    for (std::size_t k = 1; k <= kThresholdSteps; ++k)
      if (better(f1[j][k], f1[j][best])) best = k;
    out[j] = grid_threshold(best);
  }
  return out;
}

}  // namespace

namespace serial {

MetricsReport evaluate(std::span<const ScoredPrediction> preds, const LabeledDataset& truth,
                       const Thresholds& thresholds, double iou_min) {
  const auto table = tabulate(preds, truth);
  std::array<ConfusionCounts, kLabelCount> counts{};
  std::array<std::vector<double>, kLabelCount> ious;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto o = score_example(truth.examples[i], table.max_conf[i], table.boxes[i], thresholds, iou_min);
    for (std::size_t j = 0; j < kLabelCount; ++j) {
      counts[j].tp += o.counts[j].tp;
      counts[j].fp += o.counts[j].fp;
      counts[j].fn += o.counts[j].fn;
      ious[j].insert(ious[j].end(), o.ious[j].begin(), o.ious[j].end());
    }
  }
  return finish_report(counts, ious, truth, thresholds);
}

Thresholds select_thresholds(std::span<const ScoredPrediction> preds, const LabeledDataset& truth) {
  const auto table = tabulate(preds, truth);
  const auto positives = truth.label_counts();
  std::array<std::array<F1Ratio, kThresholdSteps + 1>, kLabelCount> f1{};
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    for (std::size_t k = 0; k <= kThresholdSteps; ++k) {
      const double tau = grid_threshold(k);
      std::uint64_t tp = 0, fp = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const double c = table.max_conf[i][j];
        if (c == kNoScore || c < tau) continue;
        if (truth.examples[i].labels.test(j)) ++tp; else ++fp;
      }
      f1[j][k] = f1_ratio(tp, fp, positives[j]);
    }
  }
  return pick_best(f1);
}

}  // namespace serial

MetricsReport evaluate(std::span<const ScoredPrediction> preds, const LabeledDataset& truth,
                       const Thresholds& thresholds, double iou_min) {
  const auto table = tabulate(preds, truth);
  const auto n = static_cast<std::ptrdiff_t>(truth.size());
  std::vector<ExampleOutcome> outcomes(truth.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    outcomes[u] = score_example(truth.examples[u], table.max_conf[u], table.boxes[u], thresholds, iou_min);
  }
  // Reduction in example order keeps the floating-point sums reproducible.
  std::array<ConfusionCounts, kLabelCount> counts{};
  std::array<std::vector<double>, kLabelCount> ious;
  for (const auto& o : outcomes) {
    for (std::size_t j = 0; j < kLabelCount; ++j) {
      counts[j].tp += o.counts[j].tp;
      counts[j].fp += o.counts[j].fp;
      counts[j].fn += o.counts[j].fn;
      ious[j].insert(ious[j].end(), o.ious[j].begin(), o.ious[j].end());
    }
  }
  return finish_report(counts, ious, truth, thresholds);
}

Thresholds select_thresholds(std::span<const ScoredPrediction> preds, const LabeledDataset& truth) {
  const auto table = tabulate(preds, truth);
  const auto positives = truth.label_counts();
  std::array<std::array<F1Ratio, kThresholdSteps + 1>, kLabelCount> f1{};
  const auto labels = static_cast<std::ptrdiff_t>(kLabelCount);
  // Per label: sort scores once, then count each grid point by binary search.
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t jj = 0; jj < labels; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double c = table.max_conf[i][j];
      if (c == kNoScore) continue;
      (truth.examples[i].labels.test(j) ? pos : neg).push_back(c);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    for (std::size_t k = 0; k <= kThresholdSteps; ++k) {
      const double tau = grid_threshold(k);
      const auto tp = static_cast<std::uint64_t>(pos.end() - std::lower_bound(pos.begin(), pos.end(), tau));
      const auto fp = static_cast<std::uint64_t>(neg.end() - std::lower_bound(neg.begin(), neg.end(), tau));
      f1[j][k] = f1_ratio(tp, fp, positives[j]);
    }
  }
  return pick_best(f1);
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const MetricsReport& r) {
  Json labels = Json::object();
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const auto& m = r.labels[j];
    labels[std::string(kConditionLabels[j])] = {
        {"precision", optional_number(m.precision)},
        {"recall", optional_number(m.recall)},
        {"f1", optional_number(m.f1)},
        {"mean_iou", optional_number(m.mean_iou)},
        {"assumed_threshold", m.assumed_threshold},
        {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn}}},
    };
  }
  return Json{
      {"labels", std::move(labels)},
      {"macro",
       {{"precision", optional_number(r.macro.precision)},
        {"recall", optional_number(r.macro.recall)},
        {"f1", optional_number(r.macro.f1)},
        {"iou", optional_number(r.macro.iou)}}},
      {"provenance",
       {{"dataset_digest", r.dataset_digest},
        {"model_seed", r.model_seed ? Json(*r.model_seed) : Json(nullptr)}}},
  };
}

std::string render_table(const MetricsReport& r) {
  auto cell = [](const std::optional<double>& v) {
    char buf[16];
    if (!v) return std::string("     n/a");
    std::snprintf(buf, sizeof buf, "%8.4f", *v);
    return std::string(buf);
  };
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-26s %8s %8s %8s %8s %9s %7s %7s %7s\n", "label", "prec",
                "recall", "f1", "iou", "threshold", "tp", "fp", "fn");
  out += line;
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const auto& m = r.labels[j];
    std::snprintf(line, sizeof line, "%-26s %s %s %s %s %9.2f %7llu %7llu %7llu\n",
                  std::string(kConditionLabels[j]).c_str(), cell(m.precision).c_str(),
                  cell(m.recall).c_str(), cell(m.f1).c_str(), cell(m.mean_iou).c_str(),
                  m.assumed_threshold, static_cast<unsigned long long>(m.counts.tp),
                  static_cast<unsigned long long>(m.counts.fp),
                  static_cast<unsigned long long>(m.counts.fn));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-26s %s %s %s %s\n", "macro average",
                cell(r.macro.precision).c_str(), cell(r.macro.recall).c_str(),
                cell(r.macro.f1).c_str(), cell(r.macro.iou).c_str());
  out += line;
  return out;
}

Json to_json(const Thresholds& thresholds) {
  Json doc = Json::object();
  for (std::size_t j = 0; j < kLabelCount; ++j) doc[std::string(kConditionLabels[j])] = thresholds[j];
  return doc;
}

Thresholds thresholds_from_json(const Json& doc, double fallback) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidInput, "thresholds must be a JSON object");
  Thresholds out;
  out.fill(fallback);
  for (const auto& [name, value] : doc.items()) {
    if (!value.is_number()) throw Error(ErrorCode::InvalidInput, "threshold for '" + name + "' is not a number");
    const double t = value.get<double>();
    if (!(t >= 0 && t <= 1)) throw Error(ErrorCode::InvalidInput, "threshold for '" + name + "' outside [0,1]");
    out[require_label(name)] = t;
  }
  return out;
}

}  // namespace mediaflow
