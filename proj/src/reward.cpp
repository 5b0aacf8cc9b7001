#include "dualreward/reward.hpp"

#include <cmath>
#include <string>

#include "dualreward/error.hpp"

namespace dualreward {

void RewardConfig::validate() const {
  if (!(gen_coefficient > 0.0 && gen_coefficient <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "gen_coefficient must be in (0, 1]");
  }
}

double reward_gold(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kNonPositiveScale,
                "reward scale " + std::to_string(scale));
  }
  return scale;
}

double reward_generated(double scale, double confidence,
                        const RewardConfig& cfg) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::kConfidenceOutOfRange,
                "confidence " + std::to_string(confidence));
  }
  cfg.validate();
  return cfg.effective_coefficient() * confidence * reward_gold(scale);
}

std::vector<LabeledDistractor> assign_rewards(const CandidatePool& pool,
                                              double scale,
                                              const RewardConfig& cfg) {
  std::vector<LabeledDistractor> labeled;
  labeled.reserve(pool.size());
  for (const auto& g : pool.gold) {
    LabeledDistractor d = g;
    d.reward = reward_gold(scale);
    labeled.push_back(std::move(d));
  }
  for (const auto& c : pool.generated) {
    if (!c.confidence) {
      throw Error(ErrorCode::kConfidenceOutOfRange,
                  "generated label '" + c.token + "' has no confidence");
    }
    LabeledDistractor d = c;
    d.reward = reward_generated(scale, *c.confidence, cfg);
    labeled.push_back(std::move(d));
  }
  return labeled;
}

}  // namespace dualreward
