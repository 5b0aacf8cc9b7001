#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dualreward {

enum class Origin { kGold, kGenerated };

struct LabeledDistractor {
  std::string token;
  Origin origin = Origin::kGold;
  std::optional<double> confidence;  // generated labels only
  double reward = 0.0;

  bool operator==(const LabeledDistractor&) const = default;
};

// Per-instance training labels: gold distractors followed by generated
// candidates carrying the generator's confidence.
struct CandidatePool {
  std::string instance_id;
  std::vector<LabeledDistractor> gold;
  std::vector<LabeledDistractor> generated;

  std::size_t size() const { return gold.size() + generated.size(); }
  bool operator==(const CandidatePool&) const = default;
};

struct PoolConfig {
  std::size_t n_gold = 3;
  std::size_t n_generated = 7;
  std::size_t max_generation_rounds = 10;

  std::size_t pool_size() const { return n_gold + n_generated; }
  void validate() const;
};

// Checks the CandidatePool invariants against `answer` and `cfg`; throws
// Error(kMalformedRecord) naming the first violation.
void check_pool(const CandidatePool& pool, const std::string& answer,
                const PoolConfig& cfg);

// {"id": ..., "gold": [...], "generated": [{"token": ..., "confidence": ...}]}
nlohmann::json to_json(const CandidatePool& pool);
CandidatePool pool_from_json(const nlohmann::json& record);

void save_pools(const std::filesystem::path& path,
                std::span<const CandidatePool> pools);
std::vector<CandidatePool> load_pools(const std::filesystem::path& path);

}  // namespace dualreward
