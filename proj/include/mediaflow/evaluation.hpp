#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/detection.hpp"
#include "mediaflow/vision_dataset.hpp"

namespace mediaflow {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  bool operator==(const ConfusionCounts&) const = default;
};

// std::nullopt stands for an undefined metric (zero denominator).
struct PrecisionRecallF1 {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& counts);
// Harmonic mean of defined precision and recall; undefined when P + R == 0.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

// Intersection over union of two valid boxes. Throws DegenerateBox.
double iou(const BoundingBox& a, const BoundingBox& b);

struct BoxMatch {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0;
};

struct MatchResult {
  std::vector<BoxMatch> matches;  // in acceptance order (descending IoU)
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

// Greedy one-to-one matching by descending IoU over pairs with IoU >= iou_min;
// ties broken by (pred index, gt index).
MatchResult match_detections(std::span<const BoundingBox> preds, std::span<const BoundingBox> gts,
                             double iou_min = 0.5);

using Thresholds = std::array<double, kLabelCount>;

inline constexpr std::size_t kThresholdSteps = 100;  // grid 0.00, 0.01, ..., 1.00
inline double grid_threshold(std::size_t k) { return static_cast<double>(k) / kThresholdSteps; }

struct LabelMetrics {
  ConfusionCounts counts;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> mean_iou;
  double assumed_threshold = 0.5;
};

struct MacroMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> iou;
};

struct MetricsReport {
  std::array<LabelMetrics, kLabelCount> labels{};
  MacroMetrics macro;
  std::string dataset_digest;
  std::optional<std::uint64_t> model_seed;
};

// Per (asset, label): decision = max confidence >= threshold. True positives
// contribute the IoUs of greedily matched boxes (predictions above threshold
// vs ground truth). Throws UnknownAsset for predictions outside the dataset.
MetricsReport evaluate(std::span<const ScoredPrediction> preds, const LabeledDataset& truth,
                       const Thresholds& thresholds, double iou_min = 0.5);

// Best-F1 threshold per label over the 0.01 grid; undefined F1 ranks lowest,
// ties go to the smaller threshold. F1 values are compared as exact rationals.
Thresholds select_thresholds(std::span<const ScoredPrediction> preds, const LabeledDataset& truth);

namespace serial {
MetricsReport evaluate(std::span<const ScoredPrediction> preds, const LabeledDataset& truth,
                       const Thresholds& thresholds, double iou_min = 0.5);
Thresholds select_thresholds(std::span<const ScoredPrediction> preds, const LabeledDataset& truth);
}  // namespace serial

Json to_json(const MetricsReport& report);
std::string render_table(const MetricsReport& report);

Json to_json(const Thresholds& thresholds);
// Accepts {"label": t, ...}; missing labels take `fallback`.
Thresholds thresholds_from_json(const Json& doc, double fallback = 0.5);

}  // namespace mediaflow
