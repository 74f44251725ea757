#include "mediaflow/operators.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/image.hpp"
#include "mediaflow/video.hpp"

namespace mediaflow {

namespace {

[[noreturn]] void bad_param(const std::string& kind, const std::string& what) {
  throw Error(ErrorCode::UnsupportedParameters, kind + ": " + what);
}

std::string_view type_name(ParamSpec::Type t) {
  switch (t) {
    case ParamSpec::Type::Number: return "number";
    case ParamSpec::Type::Integer: return "integer";
    case ParamSpec::Type::String: return "string";
    case ParamSpec::Type::Boolean: return "boolean";
    case ParamSpec::Type::Object: return "object";
  }
  return "value";
}

bool type_matches(ParamSpec::Type t, const Json& v) {
  switch (t) {
    case ParamSpec::Type::Number: return v.is_number();
    case ParamSpec::Type::Integer: return v.is_number_integer();
    case ParamSpec::Type::String: return v.is_string();
    case ParamSpec::Type::Boolean: return v.is_boolean();
    case ParamSpec::Type::Object: return v.is_object();
  }
  return false;
}

}  // namespace

Json validate_parameters(const OperatorSpec& spec, const Json& params) {
  if (!params.is_null() && !params.is_object()) bad_param(spec.kind, "parameters must be an object");
  Json out = Json::object();
  if (params.is_object()) {
    for (const auto& [key, value] : params.items()) {
      auto it = std::find_if(spec.parameters.begin(), spec.parameters.end(),
                             [&](const ParamSpec& p) { return p.name == key; });
      if (it == spec.parameters.end()) bad_param(spec.kind, "unknown parameter '" + key + "'");
    }
  }
  for (const auto& p : spec.parameters) {
    const bool given = params.is_object() && params.contains(p.name);
    const Json& v = given ? params.at(p.name) : p.default_value;
    if (v.is_null()) continue;
    if (!type_matches(p.type, v))
      bad_param(spec.kind, "parameter '" + p.name + "' must be a " + std::string(type_name(p.type)));
    if (v.is_number()) {
      const double x = v.get<double>();
      if (p.min && (p.min_exclusive ? !(x > *p.min) : !(x >= *p.min)))
        bad_param(spec.kind, "parameter '" + p.name + "' below minimum");
      if (p.max && !(x <= *p.max)) bad_param(spec.kind, "parameter '" + p.name + "' above maximum");
    }
    out[p.name] = v;
  }
  return out;
}

Json run_operator(const Operator& op, const Json& parameters, const MediaAsset& asset,
                  std::span<const std::uint8_t> payload, const std::vector<MetadataRecord>& prior,
                  AssetStore* assets) {
  const auto& spec = op.spec();
  if (!spec.input_kinds.count(asset.kind))
    throw Error(ErrorCode::UnsupportedMediaKind,
                spec.kind + " does not accept " + std::string(to_string(asset.kind)) + " assets");
  const Json validated = validate_parameters(spec, parameters);
  return op.run(OperatorInput{asset, payload, prior, validated, assets});
}

// ---- registry --------------------------------------------------------------

void OperatorRegistry::add(std::shared_ptr<const Operator> op) {
  std::unique_lock lock(mutex_);
  const auto& kind = op->spec().kind;
  if (kind.empty()) throw Error(ErrorCode::InvalidInput, "operator kind name is empty");
  if (!ops_.emplace(kind, std::move(op)).second)
    throw Error(ErrorCode::InvalidInput, "operator kind '" + kind + "' already registered");
}

void OperatorRegistry::remove(std::string_view kind) {
  std::unique_lock lock(mutex_);
  auto it = ops_.find(kind);
  if (it == ops_.end()) throw Error(ErrorCode::NotFound, "operator kind '" + std::string(kind) + "' not registered");
  if (auto p = pins_.find(kind); p != pins_.end() && p->second > 0)
    throw Error(ErrorCode::KindInUse, "operator kind '" + std::string(kind) + "' is used by a registered workflow");
  ops_.erase(it);
}

std::shared_ptr<const Operator> OperatorRegistry::find(std::string_view kind) const {
  std::shared_lock lock(mutex_);
  auto it = ops_.find(kind);
  return it == ops_.end() ? nullptr : it->second;
}

std::vector<std::string> OperatorRegistry::kinds() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, _] : ops_) out.push_back(k);
  return out;
}

void OperatorRegistry::pin(const std::string& kind) {
  std::unique_lock lock(mutex_);
  ++pins_[kind];
}

void OperatorRegistry::unpin(const std::string& kind) {
  std::unique_lock lock(mutex_);
  if (auto it = pins_.find(kind); it != pins_.end() && --it->second <= 0) pins_.erase(it);
}

// ---- label detection -------------------------------------------------------

std::vector<LabelDetection> detect_labels(std::span<const std::uint8_t> image_payload,
                                          const SyntheticDetector& model, double min_confidence,
                                          const GroundTruthTable* truth) {
  decode_image(image_payload);  // validates the format
  const std::string digest = sha256_hex(image_payload);
  static const GroundTruth kNone{};
  const GroundTruth* gt = &kNone;
  if (truth) {
    if (auto it = truth->find(digest); it != truth->end()) gt = &it->second;
  }
  auto all = predict_keyed(model, digest, gt->labels, gt->boxes);
  std::vector<LabelDetection> out;
  for (auto& d : all)
    if (d.confidence >= min_confidence) out.push_back(std::move(d));
  sort_detections(out);
  return out;
}

// ---- key phrases -----------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 30> kStopWords = {
    "about", "after", "also",  "because", "been",  "before", "being", "could", "from",  "have",
    "here",  "into",  "just",  "more",    "most",  "only",   "other", "over",  "some",  "such",
    "than",  "that",  "their", "them",    "then",  "there",  "these", "they",  "this",  "with",
};

bool is_token_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::span<const std::string_view> stop_words() { return kStopWords; }

std::vector<KeyPhrase> extract_key_phrases(std::string_view text, std::size_t top_k) {
  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    ++total;
    if (token.size() >= 4 &&
        !std::binary_search(kStopWords.begin(), kStopWords.end(), std::string_view(token)))
      ++freq[token];
    token.clear();
  };
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      token.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else {
      flush();
    }
  }
  flush();

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);
  std::vector<KeyPhrase> out;
  for (auto& [phrase, count] : ranked)
    out.push_back({std::move(phrase), static_cast<double>(count) / static_cast<double>(total)});
  return out;
}

namespace {

std::string bytes_as_text(std::span<const std::uint8_t> payload) {
  return std::string(payload.begin(), payload.end());
}

// Text for language operators: a Text payload, the descriptor transcript, or
// a prior transcribe output, in that order.
std::pair<std::string, std::string> source_text(const OperatorInput& in) {
  if (in.asset.kind == MediaKind::Text) return {bytes_as_text(in.payload), "payload"};
  if (in.asset.transcript) return {*in.asset.transcript, "transcript"};
  for (const auto& r : in.prior)
    if (r.status == RecordStatus::Ok && r.body.is_object() && r.body.contains("transcript") &&
        r.body["transcript"].is_string())
      return {r.body["transcript"].get<std::string>(), "transcribe"};
  return {"", "none"};
}

Json detections_body(const std::vector<LabelDetection>& detections, double presence) {
  Json list = Json::array();
  Json labels = Json::object();
  for (const auto& d : detections) {
    list.push_back(to_json(d));
    labels[std::string(kConditionLabels[d.label])] = {{"confidence", d.confidence},
                                                      {"present", d.confidence >= presence}};
  }
  return Json{{"detections", std::move(list)}, {"labels", std::move(labels)}};
}

}  // namespace

// ---- frame_extract ---------------------------------------------------------

FrameExtractOperator::FrameExtractOperator() {
  spec_.kind = "frame_extract";
  spec_.input_kinds = {MediaKind::Video};
  spec_.parameters = {{"rate", ParamSpec::Type::Number, 0.0, std::nullopt, true, nullptr}};
}

Json FrameExtractOperator::run(const OperatorInput& in) const {
  if (!in.assets) throw Error(ErrorCode::OperatorFailure, "frame_extract needs an asset store");
  const auto video = decode_video(in.payload);
  const double rate = in.parameters.contains("rate") ? in.parameters["rate"].get<double>()
                                                     : video.frame_rate;
  const auto picks = sample_frame_indices(video.frames.size(), video.frame_rate, rate);
  Json ids = Json::array(), indices = Json::array(), digests = Json::array();
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& frame = video.frames[picks[k]];
    decode_image(frame);
    const auto id = in.assets->put_derived_asset(in.asset.id, picks[k], frame, MediaKind::Image,
                                                 in.asset.name + "#frame" + std::to_string(picks[k]));
    ids.push_back(id.hex());
    indices.push_back(picks[k]);
    digests.push_back(sha256_hex(frame));
  }
  return Json{{"manifest",
               {{"source", in.asset.id.hex()},
                {"frame_rate", std::min(rate, video.frame_rate)},
                {"frame_ids", std::move(ids)},
                {"frame_indices", std::move(indices)},
                {"frame_digests", std::move(digests)}}}};
}

// ---- detect_labels ---------------------------------------------------------

DetectLabelsOperator::DetectLabelsOperator(SyntheticDetector model) : model_(std::move(model)) {
  model_.validate();
  spec_.kind = "detect_labels";
  spec_.input_kinds = {MediaKind::Image, MediaKind::Video};
  spec_.parameters = {
      {"min_confidence", ParamSpec::Type::Number, 0.0, 1.0, false, 0.0},
      {"presence_threshold", ParamSpec::Type::Number, 0.0, 1.0, false, 0.5},
      {"seed", ParamSpec::Type::Integer, 0.0, std::nullopt, false, nullptr},
      {"profile", ParamSpec::Type::Object, std::nullopt, std::nullopt, false, nullptr},
  };
}

void DetectLabelsOperator::set_ground_truth(std::shared_ptr<const GroundTruthTable> truth) {
  std::lock_guard lock(truth_mutex_);
  truth_ = std::move(truth);
}

std::shared_ptr<const GroundTruthTable> DetectLabelsOperator::truth() const {
  std::lock_guard lock(truth_mutex_);
  return truth_;
}

Json DetectLabelsOperator::run(const OperatorInput& in) const {
  SyntheticDetector model = model_;
  if (in.parameters.contains("profile")) {
    try {
      model = synthetic_detector_from_json(in.parameters["profile"]);
    } catch (const Error& e) {
      throw Error(ErrorCode::UnsupportedParameters, e.what());
    }
  }
  if (in.parameters.contains("seed")) model.seed = in.parameters["seed"].get<std::uint64_t>();
  const double min_conf = in.parameters["min_confidence"].get<double>();
  const double presence = in.parameters["presence_threshold"].get<double>();
  const auto table = truth();

  if (in.asset.kind == MediaKind::Image) {
    Json body = detections_body(detect_labels(in.payload, model, min_conf, table.get()), presence);
    body["model_seed"] = model.seed;
    return body;
  }

  // Video: score each extracted frame and keep the max confidence per label.
  const Json* manifest = nullptr;
  for (const auto& r : in.prior)
    if (r.status == RecordStatus::Ok && r.body.is_object() && r.body.contains("manifest"))
      manifest = &r.body["manifest"];
  if (!manifest) throw Error(ErrorCode::OperatorFailure, "video has no extracted frames");
  if (!in.assets) throw Error(ErrorCode::OperatorFailure, "detect_labels on video needs an asset store");
  std::array<std::optional<LabelDetection>, kLabelCount> best;
  std::size_t frames = 0;
  for (const auto& id_hex : manifest->at("frame_ids")) {
    auto id = AssetId::parse(id_hex.get<std::string>());
    if (!id) throw Error(ErrorCode::OperatorFailure, "bad frame id in manifest");
    const auto frame = in.assets->get_asset(*id);
    for (auto& d : detect_labels(frame.payload, model, min_conf, table.get())) {
      auto& slot = best[d.label];
      if (!slot || d.confidence > slot->confidence) slot = d;
    }
    ++frames;
  }
  std::vector<LabelDetection> merged;
  for (auto& b : best)
    if (b) merged.push_back(*b);
  sort_detections(merged);
  Json body = detections_body(merged, presence);
  body["model_seed"] = model.seed;
  body["frames_scored"] = frames;
  body["aggregation"] = "max";
  return body;
}

// ---- language stubs --------------------------------------------------------

KeyPhrasesOperator::KeyPhrasesOperator() {
  spec_.kind = "key_phrases";
  spec_.input_kinds = {MediaKind::Text, MediaKind::Audio, MediaKind::Video};
  spec_.parameters = {{"top_k", ParamSpec::Type::Integer, 1.0, 1000.0, false, 10}};
}

Json KeyPhrasesOperator::run(const OperatorInput& in) const {
  const auto [text, source] = source_text(in);
  Json phrases = Json::array();
  for (const auto& kp : extract_key_phrases(text, in.parameters["top_k"].get<std::size_t>()))
    phrases.push_back({{"phrase", kp.phrase}, {"score", kp.score}});
  return Json{{"key_phrases", std::move(phrases)},
              {"source", source},
              {"stop_list", kStopListVersion}};
}

TranscribeOperator::TranscribeOperator() {
  spec_.kind = "transcribe";
  spec_.input_kinds = {MediaKind::Audio, MediaKind::Video};
  spec_.parameters = {{"language", ParamSpec::Type::String, std::nullopt, std::nullopt, false, "en"}};
}

Json TranscribeOperator::run(const OperatorInput& in) const {
  if (!in.asset.transcript)
    throw Error(ErrorCode::OperatorFailure, "asset " + in.asset.id.hex() + " has no transcript sidecar");
  return Json{{"transcript", *in.asset.transcript}, {"language", in.parameters["language"]}};
}

TranslateOperator::TranslateOperator() {
  spec_.kind = "translate";
  spec_.input_kinds = {MediaKind::Text, MediaKind::Audio, MediaKind::Video};
  spec_.parameters = {
      {"target_language", ParamSpec::Type::String, std::nullopt, std::nullopt, false, "es"}};
}

Json TranslateOperator::run(const OperatorInput& in) const {
  const auto [text, source] = source_text(in);
  return Json{{"text", text}, {"target_language", in.parameters["target_language"]}, {"source", source}};
}

BuiltinOperators register_builtin_operators(OperatorRegistry& registry, SyntheticDetector model) {
  BuiltinOperators out;
  out.detect_labels = std::make_shared<DetectLabelsOperator>(std::move(model));
  registry.add(std::make_shared<FrameExtractOperator>());
  registry.add(out.detect_labels);
  registry.add(std::make_shared<KeyPhrasesOperator>());
  registry.add(std::make_shared<TranscribeOperator>());
  registry.add(std::make_shared<TranslateOperator>());
  return out;
}

}  // namespace mediaflow
