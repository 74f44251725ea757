#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/ids.hpp"

namespace mediaflow {

// The fixed condition label set C; a label's index is its position here.
inline constexpr std::size_t kLabelCount = 8;
inline constexpr std::array<std::string_view, kLabelCount> kConditionLabels = {
    "dental_issues",  "skin_lesions",         "eye_abnormalities",         "ear_infections",
    "limping",        "respiratory_distress", "gastrointestinal_problems", "behavioral_changes",
};

std::optional<std::size_t> label_index(std::string_view name);
// Throws InvalidLabel.
std::size_t require_label(std::string_view name);

// Fractions of image width/height.
struct BoundingBox {
  double left = 0;
  double top = 0;
  double width = 0;
  double height = 0;

  bool valid() const;
  double area() const { return width * height; }
  bool operator==(const BoundingBox&) const = default;
};

Json to_json(const BoundingBox& box);
// Throws DegenerateBox when the box violates its invariants.
BoundingBox bounding_box_from_json(const Json& doc);

struct LabelDetection {
  std::size_t label = 0;
  double confidence = 0;
  std::optional<BoundingBox> box;

  bool operator==(const LabelDetection&) const = default;
};

Json to_json(const LabelDetection& detection);

// Sorts by (confidence desc, label name asc).
void sort_detections(std::vector<LabelDetection>& detections);

struct ScoredPrediction {
  AssetId asset_id;
  std::size_t label = 0;
  double confidence = 0;
  std::optional<BoundingBox> box;

  bool operator==(const ScoredPrediction&) const = default;
};

Json to_json(const ScoredPrediction& prediction);
ScoredPrediction scored_prediction_from_json(const Json& doc);

// JSON lines; blank lines ignored. Throws InvalidInput with the line number.
std::vector<ScoredPrediction> parse_predictions(std::string_view jsonl);
std::string write_predictions(const std::vector<ScoredPrediction>& predictions);

}  // namespace mediaflow
