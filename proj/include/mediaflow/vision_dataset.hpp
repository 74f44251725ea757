#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/detection.hpp"
#include "mediaflow/ids.hpp"
#include "mediaflow/image.hpp"

namespace mediaflow {

using LabelSet = std::bitset<kLabelCount>;
using LabelCounts = std::array<std::size_t, kLabelCount>;

enum class ExampleSource { Clinic, Crowdsourced, Repository, VideoFrame };

std::string_view to_string(ExampleSource source);

// Provenance of an oversampled duplicate.
struct Augmentation {
  AssetId original;
  std::string transform;  // flip | rotate90 | rotate180 | rotate270
  std::uint64_t seed = 0;

  bool operator==(const Augmentation&) const = default;
};

// One (x_i, y_i) pair of the labeled dataset, with optional ground-truth boxes.
struct LabeledExample {
  AssetId asset_id;
  LabelSet labels;
  std::map<std::size_t, std::vector<BoundingBox>> boxes;  // label index -> boxes
  ExampleSource source = ExampleSource::Clinic;
  std::optional<Augmentation> augmentation;

  bool operator==(const LabeledExample&) const = default;
};

Json to_json(const LabeledExample& example);
LabeledExample labeled_example_from_json(const Json& doc);

struct LabeledDataset {
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  LabelCounts label_counts() const;
};

// Manifest: one LabeledExample JSON object per line.
LabeledDataset parse_manifest(std::string_view jsonl);
std::string write_manifest(const LabeledDataset& dataset);
// sha256 of the canonical manifest text.
std::string dataset_digest(const LabeledDataset& dataset);

// ---- preprocessing ---------------------------------------------------------

inline constexpr int kMinShortSide = 80;

struct PreprocessedImage {
  Image image;
  std::vector<double> normalized;  // pixel / 255, same layout as image.pixels
};

// Nearest-neighbour upscale so the short side is at least 80 px (aspect kept,
// long side rounded to nearest), then pixel/255 normalization.
PreprocessedImage preprocess(const Image& image);

Image resize_nearest(const Image& image, int width, int height);
Image flip_horizontal(const Image& image);
// Clockwise rotation by quarter_turns * 90 degrees.
Image rotate_quarter_turns(const Image& image, int quarter_turns);

struct AugmentedSet {
  Image crop;
  Image flip;
  Image rotate;
  int rotate_quarter_turns = 1;
};

// Seeded crop (window >= 80% of each side, resized back), horizontal flip and
// seeded 90/180/270 rotation. Deterministic per (pixels, seed). Throws TooSmall
// for images under 8x8.
AugmentedSet augment(const Image& image, std::uint64_t seed);

// Box coordinates under the same transforms.
BoundingBox flip_box(const BoundingBox& box);
BoundingBox rotate_box(const BoundingBox& box, int quarter_turns);

// ---- split / balance -------------------------------------------------------

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

// Seeded shuffle, then floor(70%) / floor(20%) / remainder. Throws DatasetTooSmall for n < 10.
DatasetSplit split_dataset(const LabeledDataset& dataset, std::uint64_t seed);

Json split_summary(const DatasetSplit& split);

// Oversamples every label in `labels` (default: all of C) whose positive count
// is below floor(alpha * max count) by duplicating seeded-random positives with
// a flip/rotate augmentation attached. Throws NoPositives.
LabeledDataset balance(const LabeledDataset& train, double alpha, std::uint64_t seed,
                       std::optional<LabelSet> labels = std::nullopt);

// ---- synthetic detector ----------------------------------------------------

struct DetectorProfile {
  double tpr = 0.9;
  double fpr = 0.05;
  double pos_lo = 0.6, pos_hi = 1.0;
  double neg_lo = 0.0, neg_hi = 0.4;

  bool operator==(const DetectorProfile&) const = default;
};

// Deterministic stand-in for a trained multi-label model. For label j of an
// example keyed by k:
//   u = unit(hash_words(seed, {hash_string(k), j, 0}))
//   positive-range draw iff u < tpr_j (j in y) or u < fpr_j (j not in y)
//   confidence = lo + unit(hash_words(seed, {hash_string(k), j, 1})) * (hi - lo)
// Boxes are the first ground-truth box, each coordinate shifted by
// (2 * unit(hash_words(seed, {hash_string(k), j, 2 + c})) - 1) * box_jitter.
struct SyntheticDetector {
  std::uint64_t seed = 0;
  std::array<DetectorProfile, kLabelCount> profiles{};
  double box_jitter = 0.0;

  // Throws InvalidInput when a profile violates its invariants.
  void validate() const;
  bool operator==(const SyntheticDetector&) const = default;
};

Json to_json(const SyntheticDetector& model);
SyntheticDetector synthetic_detector_from_json(const Json& doc);

// One detection per label, in label index order.
std::vector<LabelDetection> predict_keyed(const SyntheticDetector& model, std::string_view key,
                                          const LabelSet& labels,
                                          const std::map<std::size_t, std::vector<BoundingBox>>& boxes);
std::vector<LabelDetection> predict(const SyntheticDetector& model, const LabeledExample& example);

// Predictions for every (example, label), example-major.
std::vector<ScoredPrediction> predict_dataset(const SyntheticDetector& model,
                                              const LabeledDataset& dataset);

namespace serial {
std::vector<ScoredPrediction> predict_dataset(const SyntheticDetector& model,
                                              const LabeledDataset& dataset);
}  // namespace serial

// Corpus generator for desk-scale experiments: label j present with
// probability prevalence[j], at least one label per example, one box per label.
LabeledDataset generate_corpus(std::size_t n, const std::array<double, kLabelCount>& prevalence,
                               std::uint64_t seed);

}  // namespace mediaflow
