#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mediaflow/asset_store.hpp"
#include "mediaflow/canonical_json.hpp"
#include "mediaflow/detection.hpp"
#include "mediaflow/fair_mutex.hpp"
#include "mediaflow/metadata_store.hpp"
#include "mediaflow/vision_dataset.hpp"

namespace mediaflow {

struct ParamSpec {
  enum class Type { Number, Integer, String, Boolean, Object };

  std::string name;
  Type type = Type::Number;
  std::optional<double> min;  // inclusive
  std::optional<double> max;  // inclusive
  bool min_exclusive = false;
  Json default_value;  // null: optional without default
};

struct OperatorSpec {
  std::string kind;
  std::set<MediaKind> input_kinds;
  std::vector<ParamSpec> parameters;
  bool pure = true;
};

// Validates `params` against the spec and fills in defaults. Unknown keys,
// wrong types and out-of-range values throw UnsupportedParameters.
Json validate_parameters(const OperatorSpec& spec, const Json& params);

struct OperatorInput {
  const MediaAsset& asset;
  std::span<const std::uint8_t> payload;
  // Latest record per operator for this asset, as of invocation.
  const std::vector<MetadataRecord>& prior;
  // Validated parameters with defaults applied.
  const Json& parameters;
  // Only frame_extract writes (derived, idempotent) assets.
  AssetStore* assets = nullptr;
};

class Operator {
 public:
  virtual ~Operator() = default;
  virtual const OperatorSpec& spec() const = 0;
  // Throws Error (any code); the engine treats every throw as a failed attempt.
  virtual Json run(const OperatorInput& input) const = 0;
};

// Checks media kind and parameters, then runs. Throws UnsupportedMediaKind,
// UnsupportedParameters, or whatever the operator throws.
Json run_operator(const Operator& op, const Json& parameters, const MediaAsset& asset,
                  std::span<const std::uint8_t> payload, const std::vector<MetadataRecord>& prior,
                  AssetStore* assets = nullptr);

// Kinds referenced by registered workflows are pinned and cannot be removed.
class OperatorRegistry {
 public:
  // Throws InvalidInput on a duplicate kind name.
  void add(std::shared_ptr<const Operator> op);
  // Throws KindInUse while pinned, NotFound when absent.
  void remove(std::string_view kind);
  std::shared_ptr<const Operator> find(std::string_view kind) const;
  std::vector<std::string> kinds() const;

  void pin(const std::string& kind);
  void unpin(const std::string& kind);

 private:
  mutable FairSharedMutex mutex_;
  std::map<std::string, std::shared_ptr<const Operator>, std::less<>> ops_;
  std::map<std::string, int, std::less<>> pins_;
};

// ---- built-ins -------------------------------------------------------------

struct GroundTruth {
  LabelSet labels;
  std::map<std::size_t, std::vector<BoundingBox>> boxes;
};

// Keyed by image content digest (sha256 hex).
using GroundTruthTable = std::unordered_map<std::string, GroundTruth>;

// Detections of the synthetic model for one image, keyed by its digest,
// filtered to confidence >= min_confidence and sorted (confidence desc, label asc).
std::vector<LabelDetection> detect_labels(std::span<const std::uint8_t> image_payload,
                                          const SyntheticDetector& model, double min_confidence,
                                          const GroundTruthTable* truth = nullptr);

struct KeyPhrase {
  std::string phrase;
  double score = 0;
  bool operator==(const KeyPhrase&) const = default;
};

inline constexpr std::string_view kStopListVersion = "stopwords-v1";
std::span<const std::string_view> stop_words();

// Lowercased alphanumeric tokens; the top_k most frequent of length >= 4 not in
// the stop list, score = frequency / total token count.
std::vector<KeyPhrase> extract_key_phrases(std::string_view text, std::size_t top_k = 10);

class FrameExtractOperator final : public Operator {
 public:
  FrameExtractOperator();
  const OperatorSpec& spec() const override { return spec_; }
  Json run(const OperatorInput& input) const override;

 private:
  OperatorSpec spec_;
};

class DetectLabelsOperator final : public Operator {
 public:
  explicit DetectLabelsOperator(SyntheticDetector model = {});
  const OperatorSpec& spec() const override { return spec_; }
  Json run(const OperatorInput& input) const override;

  void set_ground_truth(std::shared_ptr<const GroundTruthTable> truth);

 private:
  std::shared_ptr<const GroundTruthTable> truth() const;

  OperatorSpec spec_;
  SyntheticDetector model_;
  mutable std::mutex truth_mutex_;
  std::shared_ptr<const GroundTruthTable> truth_;
};

class KeyPhrasesOperator final : public Operator {
 public:
  KeyPhrasesOperator();
  const OperatorSpec& spec() const override { return spec_; }
  Json run(const OperatorInput& input) const override;

 private:
  OperatorSpec spec_;
};

class TranscribeOperator final : public Operator {
 public:
  TranscribeOperator();
  const OperatorSpec& spec() const override { return spec_; }
  Json run(const OperatorInput& input) const override;

 private:
  OperatorSpec spec_;
};

class TranslateOperator final : public Operator {
 public:
  TranslateOperator();
  const OperatorSpec& spec() const override { return spec_; }
  Json run(const OperatorInput& input) const override;

 private:
  OperatorSpec spec_;
};

struct BuiltinOperators {
  std::shared_ptr<DetectLabelsOperator> detect_labels;
};

// Registers frame_extract, detect_labels, key_phrases, transcribe, translate.
BuiltinOperators register_builtin_operators(OperatorRegistry& registry,
                                            SyntheticDetector model = {});

}  // namespace mediaflow
