#include "dualreward/candidate_pool.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>

#include "dualreward/data_model.hpp"
#include "dualreward/error.hpp"

namespace dualreward {

void PoolConfig::validate() const {
  if (n_gold < 1 || n_generated < 1 || max_generation_rounds < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "n_gold, n_generated and max_generation_rounds must be >= 1");
  }
}

void check_pool(const CandidatePool& pool, const std::string& answer,
                const PoolConfig& cfg) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kMalformedRecord,
                "pool '" + pool.instance_id + "': " + what);
  };
  if (pool.gold.size() != cfg.n_gold) fail("wrong gold count");
  if (pool.generated.size() != cfg.n_generated) fail("wrong generated count");

  const std::string norm_answer = normalize_token(answer);
  std::unordered_set<std::string> gold;
  for (const auto& g : pool.gold) {
    if (g.origin != Origin::kGold || g.confidence) fail("bad gold label");
    gold.insert(normalize_token(g.token));
  }
  std::unordered_set<std::string> seen;
  for (const auto& c : pool.generated) {
    if (c.origin != Origin::kGenerated || !c.confidence) {
      fail("bad generated label");
    }
    if (!(*c.confidence >= 0.0 && *c.confidence <= 1.0)) {
      fail("confidence out of range");
    }
    std::string t = normalize_token(c.token);
    if (t == norm_answer) fail("generated token equals the answer");
    if (gold.count(t) != 0) fail("generated token equals a gold distractor");
    if (!seen.insert(t).second) fail("duplicate generated token '" + t + "'");
  }
}

nlohmann::json to_json(const CandidatePool& pool) {
  nlohmann::json gold = nlohmann::json::array();
  for (const auto& g : pool.gold) gold.push_back(g.token);
  nlohmann::json generated = nlohmann::json::array();
  for (const auto& c : pool.generated) {
    generated.push_back(
        {{"token", c.token}, {"confidence", c.confidence.value_or(0.0)}});
  }
  return {{"id", pool.instance_id}, {"gold", gold}, {"generated", generated}};
}

CandidatePool pool_from_json(const nlohmann::json& record) {
  try {
    CandidatePool pool;
    pool.instance_id = record.at("id").get<std::string>();
    for (const auto& g : record.at("gold")) {
      pool.gold.push_back({normalize_token(g.get<std::string>()), Origin::kGold,
                           std::nullopt, 0.0});
    }
    for (const auto& c : record.at("generated")) {
      const double conf = c.at("confidence").get<double>();
      if (!(conf >= 0.0 && conf <= 1.0)) {
        throw Error(ErrorCode::kConfidenceOutOfRange,
                    "pool '" + pool.instance_id + "' confidence " +
                        std::to_string(conf));
      }
      pool.generated.push_back({normalize_token(c.at("token").get<std::string>()),
                                Origin::kGenerated, conf, 0.0});
    }
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("bad pool record: ") + e.what());
  }
}

void save_pools(const std::filesystem::path& path,
                std::span<const CandidatePool> pools) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& pool : pools) out << to_json(pool).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<CandidatePool> load_pools(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<CandidatePool> pools;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
    pools.push_back(pool_from_json(record));
  }
  return pools;
}

}  // namespace dualreward
