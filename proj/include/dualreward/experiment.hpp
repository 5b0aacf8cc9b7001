#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dualreward/metrics.hpp"
#include "dualreward/pipeline.hpp"

namespace dualreward {

// Template-generated cloze data with a known distractor distribution. Each
// topic owns cue words, answers and ranked distractors; gold sets are drawn
// without replacement with weights that favour the first distractor.
struct SyntheticConfig {
  std::size_t n_instances = 500;
  std::size_t n_topics = 5;
  std::uint64_t seed = 1;
  std::string id_prefix = "syn";
};

std::vector<ClozeInstance> make_synthetic_dataset(const SyntheticConfig& cfg);

// Per-topic draw weights of the distractors, strongest first.
std::span<const double> synthetic_distractor_weights();

struct InferenceConfig {
  std::size_t k_out = 3;
  std::size_t k_gen = 10;
};

struct PolicyEvaluation {
  std::vector<EvalItem> items;  // predictions in ranked order
  EvalReport report;
};

// Runs inference with the policy as its own candidate generator and scores
// the top-k against each instance's gold distractors.
PolicyEvaluation evaluate_policy(const PolicyModel& model,
                                 std::span<const ClozeInstance> instances,
                                 const InferenceConfig& cfg = {});

struct AblationCondition {
  std::string name;
  ScaleMode scale_mode = ScaleMode::kAdaptive;
  double constant_scale = 0.15;
  RewardMode reward_mode = RewardMode::kDual;
};

// adaptive-dual, constant-0.1, constant-0.15, constant-0.2, uniform.
std::vector<AblationCondition> default_ablation_conditions();

TrainingSetup apply_condition(TrainingSetup setup,
                              const AblationCondition& condition);

struct AblationRow {
  std::string condition;
  MetricAggregates mean;  // over seeds
  std::vector<MetricAggregates> per_seed;
};

// Trains every condition for seeds base_seed .. base_seed + n_seeds - 1 on the
// same pools and evaluates on `test`.
std::vector<AblationRow> run_ablation(
    std::span<const ClozeInstance> train_set,
    std::span<const CandidatePool> pools, const Vocabulary& vocab,
    std::span<const ClozeInstance> test_set, const TrainingSetup& base,
    std::span<const AblationCondition> conditions, std::uint64_t base_seed,
    std::size_t n_seeds, const InferenceConfig& inference = {});

void write_ablation_table(std::ostream& out,
                          std::span<const AblationRow> rows);

}  // namespace dualreward
