#pragma once

#include <vector>

#include "dualreward/candidate_pool.hpp"

namespace dualreward {

enum class RewardMode { kDual, kUniform };

struct RewardConfig {
  double gen_coefficient = 0.9;  // discount on generated candidates
  RewardMode mode = RewardMode::kDual;

  // 1.0 in uniform mode, gen_coefficient otherwise.
  double effective_coefficient() const {
    return mode == RewardMode::kUniform ? 1.0 : gen_coefficient;
  }
  void validate() const;
};

double reward_gold(double scale);

// effective_coefficient * confidence * reward_gold(scale).
double reward_generated(double scale, double confidence,
                        const RewardConfig& cfg);

// Gold labels first, then generated, each in pool order, with rewards set.
std::vector<LabeledDistractor> assign_rewards(const CandidatePool& pool,
                                              double scale,
                                              const RewardConfig& cfg);

}  // namespace dualreward
