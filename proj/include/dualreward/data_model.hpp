#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace dualreward {

// Internal blank marker. Every accepted source marker is rewritten to this.
inline constexpr std::string_view kBlankMarker = "[BLANK]";

struct NormalizationPolicy {
  bool case_folding = true;
  bool whitespace_trim = true;
  // "_" stands for any run of underscores; other entries match as
  // case-insensitive whole words.
  std::vector<std::string> blank_markers_accepted = {"[BLANK]", "_", "blank"};
};

// Trims, collapses interior whitespace and ASCII-lowercases per `policy`.
// Idempotent. May return an empty string.
std::string normalize_token(std::string_view raw,
                            const NormalizationPolicy& policy = {});

struct ClozeInstance {
  std::string id;
  std::string context;  // contains exactly one kBlankMarker
  std::string answer;
  std::vector<std::string> gold_distractors;

  bool operator==(const ClozeInstance&) const = default;
};

// Rewrites every accepted blank marker in `context` to kBlankMarker and
// returns the rewritten text together with the number of markers seen.
struct BlankRewrite {
  std::string text;
  std::size_t markers = 0;
};
BlankRewrite rewrite_blanks(std::string_view context,
                            const NormalizationPolicy& policy = {});

// Parses one JSONL record {"id","context","answer","distractors"}.
// When `expected_gold` is set the distractor count must match it.
ClozeInstance parse_instance(std::string_view line,
                             const NormalizationPolicy& policy = {},
                             std::optional<std::size_t> expected_gold = 3);

nlohmann::json to_json(const ClozeInstance& instance);
std::string serialize_instance(const ClozeInstance& instance);

enum class ParseMode { kStrict, kLenient };

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct Dataset {
  std::vector<ClozeInstance> instances;
  std::vector<LineError> errors;  // only populated in lenient mode
};

// Reads a JSON-Lines file. Blank lines are skipped. Strict mode throws on the
// first bad record; lenient mode records it and continues.
Dataset load_dataset(const std::filesystem::path& path,
                     const NormalizationPolicy& policy = {},
                     ParseMode mode = ParseMode::kStrict,
                     std::optional<std::size_t> expected_gold = 3);

Dataset parse_dataset(std::string_view text,
                      const NormalizationPolicy& policy = {},
                      ParseMode mode = ParseMode::kStrict,
                      std::optional<std::size_t> expected_gold = 3);

// Closed action space: ordered, distinct, normalized tokens.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::span<const std::string> tokens);

  // Adds the normalized form of `token` unless empty or already present.
  // Returns the index of the token, or nullopt if it normalized to empty.
  std::optional<std::size_t> add(std::string_view token);

  std::optional<std::size_t> index_of(std::string_view token) const;
  bool contains(std::string_view token) const {
    return index_of(token).has_value();
  }
  const std::string& token(std::size_t index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Answers and gold distractors in instance order, then `extra`, first
// occurrence wins.
Vocabulary build_vocabulary(std::span<const ClozeInstance> instances,
                            std::span<const std::string> extra = {});

}  // namespace dualreward
