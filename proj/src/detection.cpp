#include "mediaflow/detection.hpp"

#include <algorithm>
#include <sstream>

#include "mediaflow/error.hpp"

namespace mediaflow {

std::optional<std::size_t> label_index(std::string_view name) {
  for (std::size_t j = 0; j < kLabelCount; ++j)
    if (kConditionLabels[j] == name) return j;
  return std::nullopt;
}

std::size_t require_label(std::string_view name) {
  auto j = label_index(name);
  if (!j) throw Error(ErrorCode::InvalidLabel, "unknown condition label '" + std::string(name) + "'");
  return *j;
}

bool BoundingBox::valid() const {
  // Tolerates the rounding of six-decimal serialization.
  constexpr double kSlack = 1e-6;
  return left >= 0 && top >= 0 && width > 0 && height > 0 && left + width <= 1 + kSlack &&
         top + height <= 1 + kSlack;
}

Json to_json(const BoundingBox& b) {
  return Json{{"left", b.left}, {"top", b.top}, {"width", b.width}, {"height", b.height}};
}

BoundingBox bounding_box_from_json(const Json& doc) {
  BoundingBox b;
  try {
    b.left = doc.at("left").get<double>();
    b.top = doc.at("top").get<double>();
    b.width = doc.at("width").get<double>();
    b.height = doc.at("height").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::DegenerateBox, std::string("bad bounding box: ") + e.what());
  }
  if (!b.valid()) throw Error(ErrorCode::DegenerateBox, "bounding box out of range: " + doc.dump());
  return b;
}

Json to_json(const LabelDetection& d) {
  Json doc = {{"label", kConditionLabels[d.label]}, {"confidence", d.confidence}};
  if (d.box) doc["box"] = to_json(*d.box);
  return doc;
}

void sort_detections(std::vector<LabelDetection>& detections) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const LabelDetection& a, const LabelDetection& b) {
                     if (a.confidence != b.confidence) return a.confidence > b.confidence;
                     return kConditionLabels[a.label] < kConditionLabels[b.label];
                   });
}

Json to_json(const ScoredPrediction& p) {
  Json doc = {{"asset_id", p.asset_id.hex()},
              {"label", kConditionLabels[p.label]},
              {"confidence", p.confidence}};
  if (p.box) doc["box"] = to_json(*p.box);
  return doc;
}

ScoredPrediction scored_prediction_from_json(const Json& doc) {
  ScoredPrediction p;
  auto id = AssetId::parse(doc.at("asset_id").get<std::string>());
  if (!id) throw Error(ErrorCode::InvalidInput, "bad asset_id in prediction");
  p.asset_id = *id;
  p.label = require_label(doc.at("label").get<std::string>());
  p.confidence = doc.at("confidence").get<double>();
  if (!(p.confidence >= 0 && p.confidence <= 1))
    throw Error(ErrorCode::InvalidInput, "confidence outside [0,1]");
  if (auto it = doc.find("box"); it != doc.end() && !it->is_null())
    p.box = bounding_box_from_json(*it);
  return p;
}

std::vector<ScoredPrediction> parse_predictions(std::string_view jsonl) {
  std::vector<ScoredPrediction> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(scored_prediction_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidInput,
                  "predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string write_predictions(const std::vector<ScoredPrediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    out += canonical_dump(to_json(p));
    out.push_back('\n');
  }
  return out;
}

}  // namespace mediaflow
