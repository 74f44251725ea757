#include <doctest.h>

#include <set>
#include <thread>

#include "mediaflow/canonical_json.hpp"
#include "mediaflow/digest.hpp"
#include "mediaflow/error.hpp"
#include "mediaflow/fs_util.hpp"
#include "mediaflow/ids.hpp"
#include "mediaflow/mixing.hpp"
#include "support.hpp"

using namespace mediaflow;

using mftest::sodium_sha256;

TEST_CASE("mixing test vectors") {
  CHECK(mix64(0) == 0xE220A8397B1DCDAFULL);
  SplitMix s(0);
  CHECK(s.next() == 0xE220A8397B1DCDAFULL);
  CHECK(s.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(hash_string("") == 0xCBF29CE484222325ULL);
  CHECK(hash_string("a") == 0xAF63DC4C8601EC8CULL);
  CHECK(hash_words(7, {}) == mix64(7));
  CHECK(hash_words(7, {1, 2}) == mix64(mix64(mix64(7) ^ 1) ^ 2));
  CHECK(unit_interval(0) == 0.0);
  CHECK(unit_interval(~0ULL) < 1.0);
}

TEST_CASE("SplitMix::below stays in range and hits every value") {
  SplitMix s(42);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto v = s.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("sha256 agrees with an independent implementation") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  SplitMix rng(3);
  for (std::size_t len : {0u, 1u, 55u, 56u, 64u, 1000u, 65537u}) {
    std::vector<std::uint8_t> data(len);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.next());
    CHECK(sha256_hex(data) == sodium_sha256(data));
  }
}

TEST_CASE("ids render as 32 lowercase hex and parse back") {
  IdGenerator gen(5);
  const auto id = gen.next();
  const auto hex = id.hex();
  CHECK(hex.size() == 32);
  CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(Id128::parse(hex) == id);
  CHECK_FALSE(Id128::parse("ABCDEF0123456789abcdef0123456789").has_value());
  CHECK_FALSE(Id128::parse("abc").has_value());

  IdGenerator a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("unseeded id generator is unique across threads") {
  IdGenerator gen;
  std::vector<std::vector<Id128>> per(4);
  {
    std::vector<std::jthread> threads;
    for (auto& out : per)
      threads.emplace_back([&gen, &out] {
        for (int i = 0; i < 500; ++i) out.push_back(gen.next());
      });
  }
  std::set<Id128> all;
  for (const auto& v : per) all.insert(v.begin(), v.end());
  CHECK(all.size() == 2000);
}

TEST_CASE("canonical json is byte stable") {
  Json doc = {{"b", 1}, {"a", {{"z", 0.5}, {"y", -0.0}}}, {"c", {true, nullptr, "x"}}, {"d", 1e-9}};
  CHECK(canonical_dump(doc) == R"({"a":{"y":0.000000,"z":0.500000},"b":1,"c":[true,null,"x"],"d":0.000000})");
  CHECK(canonical_dump(Json(std::nan(""))) == "null");
  CHECK(canonical_dump(Json("caf\xc3\xa9")) == "\"caf\xc3\xa9\"");
  CHECK(canonical_dump_pretty(Json{{"a", 1}}) == "{\n  \"a\": 1\n}");
}

TEST_CASE("errors carry machine-readable names") {
  CHECK(error_code_name(ErrorCode::UnknownWorkflow) == "UNKNOWN_WORKFLOW");
  CHECK(error_code_name(ErrorCode::EmptyPayload) == "EMPTY_PAYLOAD");
  CHECK(error_code_name(ErrorCode::BodyTooLarge) == "BODY_TOO_LARGE");
}

TEST_CASE("atomic writes replace whole files") {
  mftest::TempDir dir;
  const auto path = dir / "f.txt";
  fsutil::write_atomic(path, std::string_view("first"));
  fsutil::write_atomic(path, std::string_view("second"));
  CHECK(fsutil::read_text(path) == "second");
  fsutil::append_line(dir / "log", "a");
  fsutil::append_line(dir / "log", "b");
  CHECK(fsutil::read_lines(dir / "log") == std::vector<std::string>{"a", "b"});
  CHECK(fsutil::read_lines(dir / "absent").empty());
}
