#include <doctest.h>

#include <functional>
#include <random>

#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/image.hpp"
#include "mediaflow/mixing.hpp"
#include "mediaflow/operators.hpp"
#include "mediaflow/video.hpp"
#include "support.hpp"

using namespace mediaflow;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

struct Fixture {
  mftest::TempDir dir;
  AssetStore assets{dir.path()};
  OperatorRegistry registry;
  BuiltinOperators builtins = register_builtin_operators(registry);

  Json run(std::string_view kind, const Json& params, const AssetId& id,
           const std::vector<MetadataRecord>& prior = {}) {
    auto stored = assets.get_asset(id);
    return run_operator(*registry.find(kind), params, stored.descriptor, stored.payload, prior, &assets);
  }
};

Bytes video_bytes(std::size_t frames, double rate) {
  VideoContainer v;
  v.frame_rate = rate;
  for (std::size_t i = 0; i < frames; ++i)
    v.frames.push_back(encode_image(mftest::pattern_image(4, 3, static_cast<std::uint32_t>(i))));
  return encode_video(v);
}

}  // namespace

TEST_CASE("parameter validation") {
  Fixture f;
  auto img = encode_image(mftest::pattern_image(8, 8));
  auto id = f.assets.put_asset(img, MediaKind::Image, "a.pgm");
  CHECK(code_of([&] { f.run("detect_labels", {{"min_confidence", 1.01}}, id); }) ==
        ErrorCode::UnsupportedParameters);
  CHECK(code_of([&] { f.run("detect_labels", {{"min_confidence", "high"}}, id); }) ==
        ErrorCode::UnsupportedParameters);
  CHECK(code_of([&] { f.run("detect_labels", {{"colour", 1}}, id); }) == ErrorCode::UnsupportedParameters);
  CHECK_NOTHROW(f.run("detect_labels", {{"min_confidence", 1.0}}, id));

  auto text = f.assets.put_asset(mftest::bytes_of("hello"), MediaKind::Text, "t.txt");
  CHECK(code_of([&] { f.run("detect_labels", Json::object(), text); }) == ErrorCode::UnsupportedMediaKind);
  CHECK(code_of([&] { f.run("frame_extract", Json::object(), id); }) == ErrorCode::UnsupportedMediaKind);
}

TEST_CASE("frame_extract at native rate keeps every frame in order") {
  Fixture f;
  auto bytes = video_bytes(10, 1.0);
  auto id = f.assets.put_asset(bytes, MediaKind::Video, "clip.mfv");
  auto out = f.run("frame_extract", Json::object(), id);
  const auto& m = out["manifest"];
  REQUIRE(m["frame_ids"].size() == 10);
  const auto video = decode_video(bytes);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(m["frame_indices"][k] == k);
    auto frame = f.assets.get_asset(AssetId::parse(m["frame_ids"][k].get<std::string>()).value());
    CHECK(frame.descriptor.kind == MediaKind::Image);
    CHECK(frame.payload == video.frames[k]);
    CHECK(m["frame_digests"][k] == mftest::sodium_sha256(video.frames[k]));
  }
  // Re-running yields the same derived ids.
  CHECK(f.run("frame_extract", Json::object(), id) == out);
}

TEST_CASE("frame_extract at half rate takes every other frame") {
  Fixture f;
  auto id = f.assets.put_asset(video_bytes(10, 1.0), MediaKind::Video, "clip.mfv");
  auto out = f.run("frame_extract", {{"rate", 0.5}}, id);
  // floor(k / rate * native) for k = 0..4
  CHECK(out["manifest"]["frame_indices"] == Json::array({0, 2, 4, 6, 8}));
  CHECK(code_of([&] { f.run("frame_extract", {{"rate", 0}}, id); }) == ErrorCode::UnsupportedParameters);
}

TEST_CASE("frame_extract rejects an empty container") {
  Fixture f;
  auto id = f.assets.put_asset(video_bytes(0, 1.0), MediaKind::Video, "empty.mfv");
  CHECK(code_of([&] { f.run("frame_extract", Json::object(), id); }) == ErrorCode::MalformedContainer);
}

TEST_CASE("detect_labels filtering and order") {
  SyntheticDetector model;
  model.seed = 77;
  for (auto& p : model.profiles) {
    p.fpr = 0.5;
    p.pos_hi = 0.97;
  }
  auto img = encode_image(mftest::pattern_image(16, 16, 3));
  auto all = detect_labels(img, model, 0.0);
  CHECK(all.size() == kLabelCount);
  for (std::size_t i = 1; i < all.size(); ++i) {
    CHECK(all[i - 1].confidence >= all[i].confidence);
    if (all[i - 1].confidence == all[i].confidence)
      CHECK(kConditionLabels[all[i - 1].label] < kConditionLabels[all[i].label]);
  }
  CHECK(detect_labels(img, model, 1.0).empty());
  for (const auto& d : detect_labels(img, model, 0.3)) CHECK(d.confidence >= 0.3);
  CHECK(code_of([&] { detect_labels(mftest::bytes_of("nope"), model, 0.0); }) == ErrorCode::MalformedImage);
}

TEST_CASE("detect_labels follows the documented hash formula") {
  SyntheticDetector model;
  model.seed = 5150;
  auto img = encode_image(mftest::pattern_image(12, 9, 1));
  const std::string digest = mftest::sodium_sha256(img);
  GroundTruthTable truth;
  truth[digest].labels.set(0);
  truth[digest].labels.set(4);

  auto got = detect_labels(img, model, 0.0, &truth);
  REQUIRE(got.size() == kLabelCount);
  const auto key = hash_string(digest);
  for (const auto& d : got) {
    const auto& p = model.profiles[d.label];
    const double u = unit_interval(hash_words(model.seed, {key, d.label, 0}));
    const double v = unit_interval(hash_words(model.seed, {key, d.label, 1}));
    const bool pos = truth[digest].labels.test(d.label) ? u < p.tpr : u < p.fpr;
    const double want = pos ? p.pos_lo + v * (p.pos_hi - p.pos_lo) : p.neg_lo + v * (p.neg_hi - p.neg_lo);
    CHECK(d.confidence == want);
  }
}

TEST_CASE("detect_labels forced to emit dental_issues at 0.96") {
  SyntheticDetector model;
  model.seed = 1;
  model.profiles[0].tpr = 1.0;
  model.profiles[0].pos_lo = model.profiles[0].pos_hi = 0.96;
  auto img = encode_image(mftest::pattern_image(10, 10, 9));
  GroundTruthTable truth;
  truth[mftest::sodium_sha256(img)].labels.set(0);
  auto got = detect_labels(img, model, 0.9, &truth);
  REQUIRE_FALSE(got.empty());
  CHECK(got[0].label == 0);
  CHECK(got[0].confidence == 0.96);
  CHECK(to_json(got[0])["label"] == "dental_issues");
}

TEST_CASE("detect_labels on video aggregates frames by max") {
  Fixture f;
  auto id = f.assets.put_asset(video_bytes(3, 1.0), MediaKind::Video, "v.mfv");
  auto manifest = f.run("frame_extract", Json::object(), id);
  MetadataRecord prior;
  prior.asset_id = id;
  prior.operator_name = "frame_extract";
  prior.version = 1;
  prior.body = manifest;
  auto out = f.run("detect_labels", Json::object(), id, {prior});
  CHECK(out["frames_scored"] == 3);
  SyntheticDetector model;
  for (const auto& d : out["detections"]) {
    const auto label = require_label(d["label"].get<std::string>());
    double best = 0;
    for (const auto& fid : manifest["manifest"]["frame_ids"]) {
      auto frame = f.assets.get_asset(AssetId::parse(fid.get<std::string>()).value());
      for (const auto& x : detect_labels(frame.payload, model, 0.0))
        if (x.label == label) best = std::max(best, x.confidence);
    }
    CHECK(d["confidence"].get<double>() == best);
  }
  CHECK(code_of([&] { f.run("detect_labels", Json::object(), id); }) == ErrorCode::OperatorFailure);
}

TEST_CASE("key phrases") {
  CHECK(extract_key_phrases("").empty());
  auto kp = extract_key_phrases("limp limp limp paw");
  REQUIRE(kp.size() == 1);
  CHECK(kp[0].phrase == "limp");
  CHECK(kp[0].score == 0.75);
  CHECK(extract_key_phrases("about that with they, THIS from").empty());
  auto mixed = extract_key_phrases("Swelling; swelling near the EYE. Redness!", 10);
  REQUIRE(mixed.size() == 3);
  CHECK(mixed[0] == KeyPhrase{"swelling", 2.0 / 6.0});
  CHECK(mixed[1] == KeyPhrase{"near", 1.0 / 6.0});  // equal counts fall back to lexicographic
  CHECK(mixed[2] == KeyPhrase{"redness", 1.0 / 6.0});
  CHECK(extract_key_phrases("alpha bravo charlie delta", 2).size() == 2);
}

TEST_CASE("language operators read transcripts") {
  Fixture f;
  auto audio = f.assets.put_asset(mftest::bytes_of("RIFF"), MediaKind::Audio, "a.wav",
                                  std::string("dog coughing coughing at night"));
  auto t = f.run("transcribe", Json::object(), audio);
  CHECK(t["transcript"] == "dog coughing coughing at night");
  auto kp = f.run("key_phrases", Json::object(), audio);
  CHECK(kp["source"] == "transcript");
  CHECK(kp["key_phrases"][0]["phrase"] == "coughing");

  auto silent = f.assets.put_asset(mftest::bytes_of("RIFF"), MediaKind::Audio, "b.wav");
  CHECK(code_of([&] { f.run("transcribe", Json::object(), silent); }) == ErrorCode::OperatorFailure);
  CHECK(f.run("key_phrases", Json::object(), silent)["key_phrases"].empty());
}

TEST_CASE("built-in operators are pure") {
  Fixture f;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 20);
  for (int i = 0; i < 100; ++i) {
    auto img = encode_image(mftest::pattern_image(dim(rng), dim(rng), static_cast<std::uint32_t>(i)));
    auto id = f.assets.put_asset(img, MediaKind::Image, "p.pgm");
    Json params{{"min_confidence", conf(rng)}, {"seed", i}};
    CHECK(canonical_dump(f.run("detect_labels", params, id)) == canonical_dump(f.run("detect_labels", params, id)));
    std::string text;
    for (int w = 0; w < 20; ++w) text += std::string(1 + dim(rng) % 6, static_cast<char>('a' + dim(rng) % 5)) + " ";
    auto tid = f.assets.put_asset(mftest::bytes_of(text), MediaKind::Text, "t.txt");
    CHECK(f.run("key_phrases", {{"top_k", 3}}, tid) == f.run("key_phrases", {{"top_k", 3}}, tid));
  }
}

TEST_CASE("registry pins and removal") {
  OperatorRegistry r;
  register_builtin_operators(r);
  CHECK(r.kinds() == std::vector<std::string>{"detect_labels", "frame_extract", "key_phrases", "transcribe", "translate"});
  CHECK(code_of([&] { r.add(std::make_shared<KeyPhrasesOperator>()); }) == ErrorCode::InvalidInput);
  r.pin("key_phrases");
  r.pin("key_phrases");
  CHECK(code_of([&] { r.remove("key_phrases"); }) == ErrorCode::KindInUse);
  r.unpin("key_phrases");
  CHECK(code_of([&] { r.remove("key_phrases"); }) == ErrorCode::KindInUse);
  r.unpin("key_phrases");
  r.remove("key_phrases");
  CHECK(r.find("key_phrases") == nullptr);
  CHECK(code_of([&] { r.remove("key_phrases"); }) == ErrorCode::NotFound);
}
