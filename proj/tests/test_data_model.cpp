#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "dualreward/data_model.hpp"
#include "dualreward/error.hpp"

using namespace dualreward;

namespace {

const char* kMagnetRecord =
    R"({"id":"t1","context":"If an object is attracted to a magnet, the object is most likely made of ____.","answer":"metal","distractors":["wood","plastic","cardboard"]})";

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

std::filesystem::path temp_file(const std::string& name,
                                const std::string& contents) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path, std::ios::binary) << contents;
  return path;
}

}  // namespace

TEST_CASE("normalize_token examples") {
  CHECK(normalize_token("Metal ") == "metal");
  CHECK(normalize_token("wood") == "wood");
  CHECK(normalize_token("  CARDBOARD") == "cardboard");
  CHECK(normalize_token("  Stainless \t Steel ") == "stainless steel");
  CHECK(normalize_token("   ").empty());

  NormalizationPolicy keep_case;
  keep_case.case_folding = false;
  CHECK(normalize_token(" Metal ", keep_case) == "Metal");
}

TEST_CASE("normalize_token is idempotent") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "aZ _\t\nQ-x";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int len = static_cast<int>(rng() % 12);
    for (int k = 0; k < len; ++k) s.push_back(alphabet[rng() % alphabet.size()]);
    const std::string once = normalize_token(s);
    CHECK(normalize_token(once) == once);
  }
}

TEST_CASE("blank markers are rewritten to the canonical marker") {
  CHECK(rewrite_blanks("made of ____.").text == "made of [BLANK].");
  CHECK(rewrite_blanks("made of _.").markers == 1);
  CHECK(rewrite_blanks("the blank is here").text == "the [BLANK] is here");
  CHECK(rewrite_blanks("the Blank is here").markers == 1);
  CHECK(rewrite_blanks("a [BLANK] b").text == "a [BLANK] b");
  CHECK(rewrite_blanks("a blanket and a blanks").markers == 0);
  CHECK(rewrite_blanks("a __ and b ___").markers == 2);
}

TEST_CASE("parse_instance on the magnet record") {
  const ClozeInstance inst = parse_instance(kMagnetRecord);
  CHECK(inst.id == "t1");
  CHECK(inst.answer == "metal");
  CHECK(inst.gold_distractors ==
        std::vector<std::string>{"wood", "plastic", "cardboard"});
  CHECK(inst.context ==
        "If an object is attracted to a magnet, the object is most likely "
        "made of [BLANK].");
}

TEST_CASE("parse_instance error paths") {
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"no marker here","answer":"a","distractors":["b","c","d"]})");
        }) == ErrorCode::kNoBlank);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"__ and __","answer":"a","distractors":["b","c","d"]})");
        }) == ErrorCode::kMultipleBlanks);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"made of ____","answer":"metal","distractors":["wood","Wood","plastic"]})");
        }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"made of ____","answer":"metal","distractors":["wood","METAL","plastic"]})");
        }) == ErrorCode::kAnswerInGold);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"made of ____","distractors":["b","c","d"]})");
        }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":7,"context":"made of ____","answer":"a","distractors":["b","c","d"]})");
        }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] { parse_instance("not json"); }) ==
        ErrorCode::kMalformedRecord);
  CHECK(code_of([] {
          parse_instance(
              R"({"id":"x","context":"made of ____","answer":"a","distractors":["b","c"]})");
        }) == ErrorCode::kMalformedRecord);
  // Count check is configurable.
  CHECK_NOTHROW(parse_instance(
      R"({"id":"x","context":"made of ____","answer":"a","distractors":["b","c"]})",
      {}, 2));
  CHECK_NOTHROW(parse_instance(
      R"({"id":"x","context":"made of ____","answer":"a","distractors":["b"]})",
      {}, std::nullopt));
}

TEST_CASE("serialize then parse round-trips") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"alpha", "Beta", "gamma", "delta",
                                          "Epsilon", "zeta", "eta", "theta"};
  for (int i = 0; i < 200; ++i) {
    std::string context = "w" + std::to_string(i) + " ";
    const char* markers[] = {"____", "_", "blank", "[BLANK]"};
    context += markers[rng() % 4];
    context += " tail";
    std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5, 6, 7};
    std::shuffle(idx.begin(), idx.end(), rng);
    nlohmann::json rec = {{"id", "r" + std::to_string(i)},
                          {"context", context},
                          {"answer", words[idx[0]]},
                          {"distractors",
                           {words[idx[1]], words[idx[2]], words[idx[3]]}}};
    const ClozeInstance parsed = parse_instance(rec.dump());
    CHECK(parse_instance(serialize_instance(parsed)) == parsed);
  }
}

TEST_CASE("load_dataset") {
  SUBCASE("order preserved") {
    std::string text;
    for (int i = 0; i < 3; ++i) {
      text += R"({"id":"i)" + std::to_string(i) +
              R"(","context":"x ____","answer":"a","distractors":["b","c","d"]})" +
              "\n";
    }
    const auto path = temp_file("dr_three.jsonl", text);
    const Dataset ds = load_dataset(path);
    REQUIRE(ds.instances.size() == 3);
    CHECK(ds.instances[0].id == "i0");
    CHECK(ds.instances[2].id == "i2");
    // Deterministic on identical bytes.
    CHECK(load_dataset(path).instances == ds.instances);
  }
  SUBCASE("empty file") {
    const auto path = temp_file("dr_empty.jsonl", "");
    CHECK(load_dataset(path).instances.empty());
  }
  SUBCASE("lenient mode collects bad lines") {
    const std::string text =
        R"({"id":"a","context":"x ____","answer":"a","distractors":["b","c","d"]})"
        "\n"
        R"({"id":"b","context":"no marker","answer":"a","distractors":["b","c","d"]})"
        "\n"
        R"({"id":"c","context":"y ____","answer":"a","distractors":["b","c","d"]})"
        "\n";
    const auto path = temp_file("dr_lenient.jsonl", text);
    const Dataset ds = load_dataset(path, {}, ParseMode::kLenient);
    CHECK(ds.instances.size() == 2);
    REQUIRE(ds.errors.size() == 1);
    CHECK(ds.errors[0].line == 2);
    CHECK(code_of([&] { load_dataset(path, {}, ParseMode::kStrict); }) ==
          ErrorCode::kNoBlank);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { load_dataset("/nonexistent/dr.jsonl"); }) ==
          ErrorCode::kIoError);
  }
}

TEST_CASE("build_vocabulary") {
  const ClozeInstance inst = parse_instance(kMagnetRecord);
  const std::vector<std::string> extra = {"glass", "stone"};
  const Vocabulary vocab = build_vocabulary(std::span(&inst, 1), extra);
  CHECK(vocab.tokens() == std::vector<std::string>{"metal", "wood", "plastic",
                                                   "cardboard", "glass",
                                                   "stone"});
  CHECK(vocab.index_of("plastic") == 2u);
  CHECK_FALSE(vocab.index_of("steel").has_value());

  CHECK(build_vocabulary({}, {}).empty());

  const std::vector<ClozeInstance> twice = {inst, inst};
  const std::vector<std::string> dup_extra = {"Wood", " glass", "glass"};
  const Vocabulary dedup = build_vocabulary(twice, dup_extra);
  CHECK(dedup.size() == 5);
  for (const auto& t : dedup.tokens()) CHECK(normalize_token(t) == t);
}
