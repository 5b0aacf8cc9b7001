#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dualreward/candidate_pool.hpp"
#include "dualreward/data_model.hpp"
#include "dualreward/policy.hpp"
#include "dualreward/reward.hpp"
#include "dualreward/scheduler.hpp"

namespace dualreward {

struct ScoredToken {
  std::string token;
  double confidence = 0.0;

  bool operator==(const ScoredToken&) const = default;
};

using TokenSet = std::unordered_set<std::string>;

// Sorts by confidence descending, then token ascending.
void rank_by_confidence(std::vector<ScoredToken>& tokens);

// Seam for the candidate-set generator. Implementations return at most `k`
// distinct tokens outside `exclude`, ranked by confidence, each confidence in
// [0, 1]. Output must be a deterministic function of the arguments and the
// generator's own construction parameters.
class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual std::vector<ScoredToken> generate(const ClozeInstance& instance,
                                            std::size_t k,
                                            const TokenSet& exclude) = 0;
};

// Replays a fixed ranked list. Tokens are emitted in list order, skipping
// excluded ones and repeats already emitted within the same call.
class ListGenerator : public CandidateGenerator {
 public:
  explicit ListGenerator(std::vector<ScoredToken> ranked);
  std::vector<ScoredToken> generate(const ClozeInstance& instance,
                                    std::size_t k,
                                    const TokenSet& exclude) override;

 private:
  std::vector<ScoredToken> ranked_;
};

// Scores every vocabulary token by how often it appears as a gold distractor
// of the other instances in `corpus` (instances with the same id are left
// out). Confidence is the score divided by the total score.
class FrequencyGenerator : public CandidateGenerator {
 public:
  FrequencyGenerator(std::span<const ClozeInstance> corpus, Vocabulary vocab);
  std::vector<ScoredToken> generate(const ClozeInstance& instance,
                                    std::size_t k,
                                    const TokenSet& exclude) override;

 private:
  Vocabulary vocab_;
  std::vector<double> counts_;  // by vocabulary index
  std::unordered_map<std::string, std::vector<std::size_t>> own_;  // by id
};

// Top-k of the current policy's softmax over its vocabulary.
class PolicyGenerator : public CandidateGenerator {
 public:
  explicit PolicyGenerator(const PolicyModel& model) : model_(model) {}
  std::vector<ScoredToken> generate(const ClozeInstance& instance,
                                    std::size_t k,
                                    const TokenSet& exclude) override;

 private:
  const PolicyModel& model_;
};

// Initial generation, filtering against gold distractors and the answer,
// supplementary rounds until cfg.n_generated distinct candidates exist, then
// gold + generated. Throws Error(kGenerationExhausted).
CandidatePool build_pool(const ClozeInstance& instance, CandidateGenerator& gen,
                         const PoolConfig& cfg);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;  // instances per batch
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
  bool gaussian_init = false;  // zeros otherwise
  // Refresh generated-candidate confidences from the current policy at the
  // start of every epoch instead of keeping the generator's values.
  bool recompute_confidences = false;

  void validate() const;
};

struct TrainingSetup {
  SchedulerConfig scheduler;
  RewardConfig reward;
  PoolConfig pool;
  FeatureSpec features;
  TrainConfig train;
};

struct TrajectoryRecord {
  std::size_t step = 0;   // 1-based batch counter over the whole run
  std::size_t epoch = 0;  // 1-based
  double batch_nll = 0.0;
  double avg_loss = 0.0;  // average the scale was computed from
  double reward_scale = 0.0;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct TrainResult {
  PolicyModel model;
  std::vector<TrajectoryRecord> trajectory;
};

// Every instance needs a pool with the same id; pool tokens must be in
// `vocab`.
TrainResult train(std::span<const ClozeInstance> dataset,
                  std::span<const CandidatePool> pools, const Vocabulary& vocab,
                  const TrainingSetup& setup);

// Vocabulary over answers, gold and generated pool tokens, then `extra`.
Vocabulary training_vocabulary(std::span<const ClozeInstance> dataset,
                               std::span<const CandidatePool> pools,
                               std::span<const std::string> extra = {});

void write_trajectory_csv(std::ostream& out,
                          std::span<const TrajectoryRecord> records);

using ConfidenceFn = std::function<double(const std::string& token)>;

// Generate k_gen candidates, drop the answer and repeats, rank by `score`
// (ties by token), keep k_out. One supplementary round runs if fewer than
// k_out survive; then Error(kInsufficientCandidates).
std::vector<ScoredToken> infer(const ClozeInstance& instance,
                               const ConfidenceFn& score,
                               CandidateGenerator& gen, std::size_t k_out = 3,
                               std::size_t k_gen = 10);

std::vector<ScoredToken> infer(const ClozeInstance& instance,
                               const PolicyModel& model,
                               CandidateGenerator& gen, std::size_t k_out = 3,
                               std::size_t k_gen = 10);

}  // namespace dualreward
