#include "dualreward/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

char ascii_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t k = 0; k < word.size(); ++k) {
    if (ascii_lower(text[pos + k]) != ascii_lower(word[k])) return false;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

// Length of the literal marker match at `pos`, or 0. Alphanumeric edges of
// the marker must sit on word boundaries so "blanket" is not a blank.
std::size_t match_literal(std::string_view text, std::size_t pos,
                          std::string_view marker) {
  if (marker.empty() || !iequals_at(text, pos, marker)) return 0;
  if (is_word_char(marker.front()) && pos > 0 && is_word_char(text[pos - 1])) {
    return 0;
  }
  const std::size_t end = pos + marker.size();
  if (is_word_char(marker.back()) && end < text.size() &&
      is_word_char(text[end])) {
    return 0;
  }
  return marker.size();
}

bool is_underscore_marker(std::string_view marker) {
  return !marker.empty() &&
         std::all_of(marker.begin(), marker.end(),
                     [](char c) { return c == '_'; });
}

const std::string& require_string(const nlohmann::json& obj,
                                  const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("missing field '") + field + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("field '") + field + "' is not a string");
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

std::string normalize_token(std::string_view raw,
                            const NormalizationPolicy& policy) {
  std::string out;
  out.reserve(raw.size());
  if (policy.whitespace_trim) {
    bool pending_space = false;
    for (char c : trim(raw)) {
      if (is_space(c)) {
        pending_space = true;
        continue;
      }
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  } else {
    out.assign(raw);
  }
  if (policy.case_folding) {
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  }
  return out;
}

BlankRewrite rewrite_blanks(std::string_view context,
                            const NormalizationPolicy& policy) {
  BlankRewrite result;
  const std::string_view text =
      policy.whitespace_trim ? trim(context) : context;
  result.text.reserve(text.size());

  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t consumed = match_literal(text, i, kBlankMarker);
    for (const auto& marker : policy.blank_markers_accepted) {
      if (consumed != 0) break;
      if (is_underscore_marker(marker)) {
        if (text[i] == '_') {
          std::size_t j = i;
          while (j < text.size() && text[j] == '_') ++j;
          consumed = j - i;
        }
      } else {
        consumed = match_literal(text, i, marker);
      }
    }
    if (consumed != 0) {
      result.text.append(kBlankMarker);
      ++result.markers;
      i += consumed;
    } else {
      result.text.push_back(text[i]);
      ++i;
    }
  }
  return result;
}

ClozeInstance parse_instance(std::string_view line,
                             const NormalizationPolicy& policy,
                             std::optional<std::size_t> expected_gold) {
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("invalid JSON: ") + e.what());
  }
  if (!record.is_object()) {
    throw Error(ErrorCode::kMalformedRecord, "record is not a JSON object");
  }

  ClozeInstance instance;
  instance.id = require_string(record, "id");
  const std::string& raw_context = require_string(record, "context");
  const std::string& raw_answer = require_string(record, "answer");

  auto it = record.find("distractors");
  if (it == record.end()) {
    throw Error(ErrorCode::kMalformedRecord, "missing field 'distractors'");
  }
  if (!it->is_array()) {
    throw Error(ErrorCode::kMalformedRecord,
                "field 'distractors' is not an array");
  }

  BlankRewrite blanks = rewrite_blanks(raw_context, policy);
  if (blanks.markers == 0) {
    throw Error(ErrorCode::kNoBlank, "context of '" + instance.id +
                                         "' has no blank marker");
  }
  if (blanks.markers > 1) {
    throw Error(ErrorCode::kMultipleBlanks,
                "context of '" + instance.id + "' has " +
                    std::to_string(blanks.markers) + " blank markers");
  }
  instance.context = std::move(blanks.text);

  instance.answer = normalize_token(raw_answer, policy);
  if (instance.answer.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "empty answer");
  }

  std::unordered_set<std::string> seen;
  for (const auto& entry : *it) {
    if (!entry.is_string()) {
      throw Error(ErrorCode::kMalformedRecord, "distractor is not a string");
    }
    std::string token = normalize_token(entry.get<std::string>(), policy);
    if (token.empty()) {
      throw Error(ErrorCode::kMalformedRecord, "empty distractor");
    }
    if (!seen.insert(token).second) {
      throw Error(ErrorCode::kMalformedRecord,
                  "duplicate distractor '" + token + "'");
    }
    if (token == instance.answer) {
      throw Error(ErrorCode::kAnswerInGold,
                  "answer '" + token + "' is also a gold distractor");
    }
    instance.gold_distractors.push_back(std::move(token));
  }
  if (expected_gold && instance.gold_distractors.size() != *expected_gold) {
    throw Error(ErrorCode::kMalformedRecord,
                "expected " + std::to_string(*expected_gold) +
                    " distractors, got " +
                    std::to_string(instance.gold_distractors.size()));
  }
  return instance;
}

nlohmann::json to_json(const ClozeInstance& instance) {
  return nlohmann::json{{"id", instance.id},
                        {"context", instance.context},
                        {"answer", instance.answer},
                        {"distractors", instance.gold_distractors}};
}

std::string serialize_instance(const ClozeInstance& instance) {
  return to_json(instance).dump();
}

Dataset parse_dataset(std::string_view text, const NormalizationPolicy& policy,
                      ParseMode mode,
                      std::optional<std::size_t> expected_gold) {
  Dataset dataset;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      dataset.instances.push_back(parse_instance(line, policy, expected_gold));
    } catch (const Error& e) {
      if (mode == ParseMode::kStrict) {
        throw Error(e.code(), "line " + std::to_string(line_no) + ": " +
                                  e.what());
      }
      dataset.errors.push_back({line_no, e.what()});
    }
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path,
                     const NormalizationPolicy& policy, ParseMode mode,
                     std::optional<std::size_t> expected_gold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw Error(ErrorCode::kIoError, "failed reading " + path.string());
  }
  return parse_dataset(buffer.str(), policy, mode, expected_gold);
}

Vocabulary::Vocabulary(std::span<const std::string> tokens) {
  for (const auto& t : tokens) add(t);
}

std::optional<std::size_t> Vocabulary::add(std::string_view token) {
  std::string normalized = normalize_token(token);
  if (normalized.empty()) return std::nullopt;
  auto [it, inserted] = index_.try_emplace(normalized, tokens_.size());
  if (inserted) tokens_.push_back(std::move(normalized));
  return it->second;
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "vocabulary index " + std::to_string(index));
  }
  return tokens_[index];
}

Vocabulary build_vocabulary(std::span<const ClozeInstance> instances,
                            std::span<const std::string> extra) {
  Vocabulary vocab;
  for (const auto& instance : instances) {
    vocab.add(instance.answer);
    for (const auto& d : instance.gold_distractors) vocab.add(d);
  }
  for (const auto& t : extra) vocab.add(t);
  return vocab;
}

}  // namespace dualreward
