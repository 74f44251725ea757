#include "mediaflow/vision_dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/mixing.hpp"

namespace mediaflow {

std::string_view to_string(ExampleSource source) {
  switch (source) {
    case ExampleSource::Clinic: return "Clinic";
    case ExampleSource::Crowdsourced: return "Crowdsourced";
    case ExampleSource::Repository: return "Repository";
    case ExampleSource::VideoFrame: return "VideoFrame";
  }
  return "Clinic";
}

namespace {

ExampleSource parse_source(std::string_view s) {
  if (s == "Clinic") return ExampleSource::Clinic;
  if (s == "Crowdsourced") return ExampleSource::Crowdsourced;
  if (s == "Repository") return ExampleSource::Repository;
  if (s == "VideoFrame") return ExampleSource::VideoFrame;
  throw Error(ErrorCode::InvalidInput, "unknown example source '" + std::string(s) + "'");
}

}  // namespace

Json to_json(const LabeledExample& e) {
  Json labels = Json::array();
  for (std::size_t j = 0; j < kLabelCount; ++j)
    if (e.labels.test(j)) labels.push_back(kConditionLabels[j]);
  Json boxes = Json::object();
  for (const auto& [j, list] : e.boxes) {
    Json arr = Json::array();
    for (const auto& b : list) arr.push_back(to_json(b));
    boxes[std::string(kConditionLabels[j])] = std::move(arr);
  }
  Json doc = {{"asset_id", e.asset_id.hex()},
              {"labels", std::move(labels)},
              {"boxes", std::move(boxes)},
              {"source", to_string(e.source)}};
  if (e.augmentation) {
    doc["augmentation"] = {{"original", e.augmentation->original.hex()},
                           {"transform", e.augmentation->transform},
                           {"seed", e.augmentation->seed}};
  }
  return doc;
}

LabeledExample labeled_example_from_json(const Json& doc) {
  LabeledExample e;
  try {
    auto id = AssetId::parse(doc.at("asset_id").get<std::string>());
    if (!id) throw Error(ErrorCode::InvalidInput, "bad asset_id in manifest");
    e.asset_id = *id;
    for (const auto& l : doc.at("labels")) e.labels.set(require_label(l.get<std::string>()));
    if (auto it = doc.find("boxes"); it != doc.end()) {
      for (const auto& [name, list] : it->items()) {
        const auto j = require_label(name);
        if (!e.labels.test(j))
          throw Error(ErrorCode::InvalidInput, "box given for absent label '" + name + "'");
        for (const auto& b : list) e.boxes[j].push_back(bounding_box_from_json(b));
      }
    }
    if (auto it = doc.find("source"); it != doc.end()) e.source = parse_source(it->get<std::string>());
    if (auto it = doc.find("augmentation"); it != doc.end() && it->is_object()) {
      Augmentation a;
      auto orig = AssetId::parse(it->at("original").get<std::string>());
      if (!orig) throw Error(ErrorCode::InvalidInput, "bad augmentation original");
      a.original = *orig;
      a.transform = it->at("transform").get<std::string>();
      a.seed = it->at("seed").get<std::uint64_t>();
      e.augmentation = std::move(a);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidInput, std::string("bad manifest entry: ") + ex.what());
  }
  return e;
}

LabelCounts LabeledDataset::label_counts() const {
  LabelCounts counts{};
  for (const auto& e : examples)
    for (std::size_t j = 0; j < kLabelCount; ++j) counts[j] += e.labels.test(j) ? 1 : 0;
  return counts;
}

LabeledDataset parse_manifest(std::string_view jsonl) {
  LabeledDataset d;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded())
      throw Error(ErrorCode::InvalidInput, "manifest line " + std::to_string(line_no) + " is not JSON");
    d.examples.push_back(labeled_example_from_json(doc));
  }
  return d;
}

std::string write_manifest(const LabeledDataset& dataset) {
  std::string out;
  for (const auto& e : dataset.examples) {
    out += canonical_dump(to_json(e));
    out.push_back('\n');
  }
  return out;
}

std::string dataset_digest(const LabeledDataset& dataset) {
  return sha256_hex(write_manifest(dataset));
}

// ---- preprocessing ---------------------------------------------------------

Image resize_nearest(const Image& src, int width, int height) {
  Image out(width, height, src.channels);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * src.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * src.width / width);
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

PreprocessedImage preprocess(const Image& image) {
  if (image.width < 1 || image.height < 1)
    throw Error(ErrorCode::ZeroDimension, "image has a zero dimension");
  PreprocessedImage out;
  const int short_side = std::min(image.width, image.height);
  if (short_side < kMinShortSide) {
    const double scale = static_cast<double>(kMinShortSide) / short_side;
    int w = image.width == short_side ? kMinShortSide
                                      : static_cast<int>(std::lround(image.width * scale));
    int h = image.height == short_side ? kMinShortSide
                                       : static_cast<int>(std::lround(image.height * scale));
    out.image = resize_nearest(image, w, h);
  } else {
    out.image = image;
  }
  out.normalized.resize(out.image.pixels.size());
  std::transform(out.image.pixels.begin(), out.image.pixels.end(), out.normalized.begin(),
                 [](std::uint8_t p) { return p / 255.0; });
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c) out.at(src.width - 1 - x, y, c) = src.at(x, y, c);
  return out;
}

Image rotate_quarter_turns(const Image& src, int quarter_turns) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  if (turns == 0) return src;
  const bool swap = turns % 2 == 1;
  Image out(swap ? src.height : src.width, swap ? src.width : src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      int nx = x, ny = y;
      switch (turns) {
        case 1: nx = src.height - 1 - y; ny = x; break;
        case 2: nx = src.width - 1 - x; ny = src.height - 1 - y; break;
        case 3: nx = y; ny = src.width - 1 - x; break;
      }
      for (int c = 0; c < src.channels; ++c) out.at(nx, ny, c) = src.at(x, y, c);
    }
  }
  return out;
}

AugmentedSet augment(const Image& image, std::uint64_t seed) {
  if (image.width < 8 || image.height < 8)
    throw Error(ErrorCode::TooSmall, "augmentation needs at least 8x8 pixels");
  const std::uint64_t key =
      hash_words(seed, {hash_bytes(image.pixels), static_cast<std::uint64_t>(image.width),
                        static_cast<std::uint64_t>(image.height),
                        static_cast<std::uint64_t>(image.channels)});
  SplitMix rng(key);
  const int min_w = (image.width * 8 + 9) / 10;  // ceil(0.8 * w)
  const int min_h = (image.height * 8 + 9) / 10;
  const int cw = min_w + static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width - min_w + 1)));
  const int ch = min_h + static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height - min_h + 1)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.width - cw + 1)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(image.height - ch + 1)));
  Image window(cw, ch, image.channels);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < image.channels; ++c) window.at(x, y, c) = image.at(x0 + x, y0 + y, c);

  AugmentedSet out;
  out.crop = preprocess(resize_nearest(window, image.width, image.height)).image;
  out.flip = flip_horizontal(image);
  out.rotate_quarter_turns = 1 + static_cast<int>(rng.below(3));
  out.rotate = rotate_quarter_turns(image, out.rotate_quarter_turns);
  return out;
}

BoundingBox flip_box(const BoundingBox& b) {
  return {1.0 - b.left - b.width, b.top, b.width, b.height};
}

BoundingBox rotate_box(const BoundingBox& b, int quarter_turns) {
  switch (((quarter_turns % 4) + 4) % 4) {
    case 1: return {1.0 - b.top - b.height, b.left, b.height, b.width};
    case 2: return {1.0 - b.left - b.width, 1.0 - b.top - b.height, b.width, b.height};
    case 3: return {b.top, 1.0 - b.left - b.width, b.height, b.width};
    default: return b;
  }
}

// ---- split / balance -------------------------------------------------------

DatasetSplit split_dataset(const LabeledDataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 10) throw Error(ErrorCode::DatasetTooSmall, "split needs at least 10 examples, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  const std::size_t n_train = n * 7 / 10;
  const std::size_t n_val = n * 2 / 10;
  DatasetSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& target = i < n_train ? out.train : i < n_train + n_val ? out.validation : out.test;
    target.examples.push_back(dataset.examples[order[i]]);
  }
  return out;
}

Json split_summary(const DatasetSplit& split) {
  auto part = [](const LabeledDataset& d) {
    Json counts = Json::object();
    const auto c = d.label_counts();
    for (std::size_t j = 0; j < kLabelCount; ++j) counts[std::string(kConditionLabels[j])] = c[j];
    return Json{{"size", d.size()}, {"label_counts", counts}};
  };
  return Json{{"train", part(split.train)},
              {"validation", part(split.validation)},
              {"test", part(split.test)}};
}

LabeledDataset balance(const LabeledDataset& train, double alpha, std::uint64_t seed,
                       std::optional<LabelSet> labels) {
  if (train.examples.empty()) throw Error(ErrorCode::DatasetTooSmall, "cannot balance an empty dataset");
  if (!(alpha > 0 && alpha <= 1)) throw Error(ErrorCode::InvalidInput, "alpha must be in (0, 1]");
  const LabelSet scope = labels.value_or(LabelSet{}.set());

  auto counts = train.label_counts();
  std::size_t max_count = 0;
  for (std::size_t j = 0; j < kLabelCount; ++j)
    if (scope.test(j)) max_count = std::max(max_count, counts[j]);
  for (std::size_t j = 0; j < kLabelCount; ++j)
    if (scope.test(j) && counts[j] == 0)
      throw Error(ErrorCode::NoPositives, "label '" + std::string(kConditionLabels[j]) + "' has no positives");
  const auto target = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(max_count)));

  static constexpr std::array<std::string_view, 4> kTransforms = {"flip", "rotate90", "rotate180",
                                                                  "rotate270"};
  LabeledDataset out = train;
  SplitMix rng(seed);
  std::uint64_t serial = 0;
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    if (!scope.test(j) || counts[j] >= target) continue;
    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < train.examples.size(); ++i)
      if (train.examples[i].labels.test(j)) positives.push_back(i);
    while (counts[j] < target) {
      const auto& src = train.examples[positives[rng.below(positives.size())]];
      const auto which = rng.below(kTransforms.size());
      LabeledExample dup = src;
      const AssetId original = src.augmentation ? src.augmentation->original : src.asset_id;
      const std::uint64_t h = hash_words(seed, {original.raw().hi(), original.raw().lo(), serial++});
      dup.asset_id = AssetId(Id128(mix64(h ^ 1), mix64(h ^ 2)));
      dup.augmentation = Augmentation{original, std::string(kTransforms[which]), h};
      for (auto& [label, list] : dup.boxes)
        for (auto& b : list) b = which == 0 ? flip_box(b) : rotate_box(b, static_cast<int>(which));
      for (std::size_t k = 0; k < kLabelCount; ++k) counts[k] += dup.labels.test(k) ? 1 : 0;
      out.examples.push_back(std::move(dup));
    }
  }
  return out;
}

// ---- synthetic detector ----------------------------------------------------

void SyntheticDetector::validate() const {
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const auto& p = profiles[j];
    const std::string who = "profile '" + std::string(kConditionLabels[j]) + "': ";
    if (!(p.tpr >= 0 && p.tpr <= 1 && p.fpr >= 0 && p.fpr <= 1))
      throw Error(ErrorCode::InvalidInput, who + "tpr and fpr must be in [0,1]");
    if (!(p.pos_lo <= p.pos_hi && p.pos_lo > 0.5 && p.pos_hi <= 1))
      throw Error(ErrorCode::InvalidInput, who + "positive range must lie in (0.5, 1]");
    if (!(p.neg_lo <= p.neg_hi && p.neg_lo >= 0 && p.neg_hi <= 0.5))
      throw Error(ErrorCode::InvalidInput, who + "negative range must lie in [0, 0.5]");
  }
  if (!(box_jitter >= 0 && box_jitter <= 1)) throw Error(ErrorCode::InvalidInput, "box_jitter must be in [0,1]");
}

Json to_json(const SyntheticDetector& m) {
  Json profiles = Json::object();
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const auto& p = m.profiles[j];
    profiles[std::string(kConditionLabels[j])] = {
        {"tpr", p.tpr},
        {"fpr", p.fpr},
        {"pos_confidence_range", {p.pos_lo, p.pos_hi}},
        {"neg_confidence_range", {p.neg_lo, p.neg_hi}},
    };
  }
  return Json{{"seed", m.seed}, {"box_jitter", m.box_jitter}, {"profiles", profiles}};
}

SyntheticDetector synthetic_detector_from_json(const Json& doc) {
  SyntheticDetector m;
  try {
    m.seed = doc.value("seed", std::uint64_t{0});
    m.box_jitter = doc.value("box_jitter", 0.0);
    auto read_profile = [](const Json& p, DetectorProfile base) {
      base.tpr = p.value("tpr", base.tpr);
      base.fpr = p.value("fpr", base.fpr);
      if (auto it = p.find("pos_confidence_range"); it != p.end()) {
        base.pos_lo = it->at(0).get<double>();
        base.pos_hi = it->at(1).get<double>();
      }
      if (auto it = p.find("neg_confidence_range"); it != p.end()) {
        base.neg_lo = it->at(0).get<double>();
        base.neg_hi = it->at(1).get<double>();
      }
      return base;
    };
    DetectorProfile fallback;
    const Json profiles = doc.value("profiles", Json::object());
    if (auto it = profiles.find("default"); it != profiles.end()) fallback = read_profile(*it, fallback);
    m.profiles.fill(fallback);
    for (const auto& [name, p] : profiles.items()) {
      if (name == "default") continue;
      const auto j = require_label(name);
      m.profiles[j] = read_profile(p, fallback);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("bad detector profile: ") + e.what());
  }
  m.validate();
  return m;
}

std::vector<LabelDetection> predict_keyed(const SyntheticDetector& model, std::string_view key,
                                          const LabelSet& labels,
                                          const std::map<std::size_t, std::vector<BoundingBox>>& boxes) {
  const std::uint64_t k = hash_string(key);
  std::vector<LabelDetection> out;
  out.reserve(kLabelCount);
  for (std::size_t j = 0; j < kLabelCount; ++j) {
    const auto& p = model.profiles[j];
    const double u = unit_interval(hash_words(model.seed, {k, j, 0}));
    const bool truth = labels.test(j);
    const bool positive_draw = u < (truth ? p.tpr : p.fpr);
    const double v = unit_interval(hash_words(model.seed, {k, j, 1}));
    LabelDetection d;
    d.label = j;
    d.confidence = positive_draw ? p.pos_lo + v * (p.pos_hi - p.pos_lo)
                                 : p.neg_lo + v * (p.neg_hi - p.neg_lo);
    if (positive_draw && truth) {
      if (auto it = boxes.find(j); it != boxes.end() && !it->second.empty()) {
        const auto& gt = it->second.front();
        double coord[4] = {gt.left, gt.top, gt.width, gt.height};
        for (std::uint64_t c = 0; c < 4; ++c) {
          const double w = unit_interval(hash_words(model.seed, {k, j, 2 + c}));
          coord[c] += (2.0 * w - 1.0) * model.box_jitter;
        }
        constexpr double kMinSide = 1e-6;
        BoundingBox b;
        b.left = std::clamp(coord[0], 0.0, 1.0 - kMinSide);
        b.top = std::clamp(coord[1], 0.0, 1.0 - kMinSide);
        b.width = std::clamp(coord[2], kMinSide, 1.0 - b.left);
        b.height = std::clamp(coord[3], kMinSide, 1.0 - b.top);
        d.box = b;
      }
    }
    out.push_back(d);
  }
  return out;
}

std::vector<LabelDetection> predict(const SyntheticDetector& model, const LabeledExample& example) {
  return predict_keyed(model, example.asset_id.hex(), example.labels, example.boxes);
}

namespace {

void emit_predictions(const SyntheticDetector& model, const LabeledExample& e,
                      ScoredPrediction* slot) {
  for (const auto& d : predict(model, e)) {
    *slot++ = ScoredPrediction{e.asset_id, d.label, d.confidence, d.box};
  }
}

}  // namespace

std::vector<ScoredPrediction> predict_dataset(const SyntheticDetector& model,
                                              const LabeledDataset& dataset) {
  const auto n = static_cast<std::ptrdiff_t>(dataset.size());
  std::vector<ScoredPrediction> out(dataset.size() * kLabelCount);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    emit_predictions(model, dataset.examples[static_cast<std::size_t>(i)],
                     out.data() + static_cast<std::size_t>(i) * kLabelCount);
  }
  return out;
}

namespace serial {

std::vector<ScoredPrediction> predict_dataset(const SyntheticDetector& model,
                                              const LabeledDataset& dataset) {
  std::vector<ScoredPrediction> out(dataset.size() * kLabelCount);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    emit_predictions(model, dataset.examples[i], out.data() + i * kLabelCount);
  return out;
}

}  // namespace serial

LabeledDataset generate_corpus(std::size_t n, const std::array<double, kLabelCount>& prevalence,
                               std::uint64_t seed) {
  LabeledDataset d;
  d.examples.reserve(n);
  SplitMix rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledExample e;
    e.asset_id = AssetId(Id128(rng.next(), rng.next()));
    for (std::size_t j = 0; j < kLabelCount; ++j)
      if (rng.unit() < prevalence[j]) e.labels.set(j);
    if (e.labels.none()) e.labels.set(rng.below(kLabelCount));
    for (std::size_t j = 0; j < kLabelCount; ++j) {
      if (!e.labels.test(j)) continue;
      // Millesimal coordinates survive the six-decimal manifest encoding exactly.
      const auto w = 100 + rng.below(401);
      const auto h = 100 + rng.below(401);
      const auto l = rng.below(1000 - w + 1);
      const auto t = rng.below(1000 - h + 1);
      e.boxes[j].push_back(BoundingBox{l / 1000.0, t / 1000.0, w / 1000.0, h / 1000.0});
    }
    e.source = static_cast<ExampleSource>(rng.below(3));
    d.examples.push_back(std::move(e));
  }
  return d;
}

}  // namespace mediaflow
