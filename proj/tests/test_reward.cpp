#include <doctest.h>

#include <cmath>
#include <random>

#include "dualreward/error.hpp"
#include "dualreward/reward.hpp"

using namespace dualreward;

namespace {

CandidatePool pool_3_plus_7(double confidence) {
  CandidatePool pool;
  pool.instance_id = "t1";
  for (const char* g : {"wood", "plastic", "cardboard"}) {
    pool.gold.push_back({g, Origin::kGold, std::nullopt, 0.0});
  }
  for (const char* c :
       {"glass", "stone", "steel", "aluminum", "clay", "iron", "rubber"}) {
    pool.generated.push_back({c, Origin::kGenerated, confidence, 0.0});
  }
  return pool;
}

}  // namespace

TEST_CASE("reward_gold is the scale") {
  CHECK(reward_gold(0.15) == 0.15);
  CHECK(reward_gold(0.1) == 0.1);
  CHECK(reward_gold(0.2) == 0.2);
  CHECK_THROWS_AS(reward_gold(0.0), Error);
  CHECK_THROWS_AS(reward_gold(-0.1), Error);
}

TEST_CASE("reward_generated examples") {
  RewardConfig dual;
  RewardConfig uniform{0.9, RewardMode::kUniform};
  CHECK(reward_generated(0.15, 0.5, dual) == doctest::Approx(0.0675).epsilon(1e-14));
  CHECK(reward_generated(0.15, 0.0, dual) == 0.0);
  CHECK(reward_generated(0.15, 0.0, uniform) == 0.0);
  CHECK(reward_generated(0.15, 0.5, uniform) == doctest::Approx(0.075).epsilon(1e-14));
  CHECK(uniform.effective_coefficient() == 1.0);
  CHECK(dual.effective_coefficient() == 0.9);

  try {
    reward_generated(0.15, 1.5, dual);
    FAIL("expected ConfidenceOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfidenceOutOfRange);
  }
  try {
    reward_generated(0.0, 0.5, dual);
    FAIL("expected NonPositiveScale");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveScale);
  }
  CHECK_THROWS_AS(reward_generated(0.1, 0.5, RewardConfig{0.0, RewardMode::kDual}),
                  Error);
}

TEST_CASE("assign_rewards") {
  const CandidatePool pool = pool_3_plus_7(1.0);
  const auto dual = assign_rewards(pool, 0.2, RewardConfig{});
  REQUIRE(dual.size() == 10);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(dual[i].token == pool.gold[i].token);
    CHECK(dual[i].reward == 0.2);
  }
  for (std::size_t i = 3; i < 10; ++i) {
    CHECK(dual[i].token == pool.generated[i - 3].token);
    CHECK(dual[i].reward == doctest::Approx(0.18).epsilon(1e-14));
  }
  const auto uniform =
      assign_rewards(pool, 0.2, RewardConfig{0.9, RewardMode::kUniform});
  for (std::size_t i = 3; i < 10; ++i) CHECK(uniform[i].reward == 0.2);

  CHECK(assign_rewards(CandidatePool{}, 0.2, RewardConfig{}).empty());
}

TEST_CASE("reward algebra holds on random draws") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> scale(1e-6, 10.0);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_real_distribution<double> k(1e-3, 100.0);
  const RewardConfig dual;
  const RewardConfig uniform{0.9, RewardMode::kUniform};
  for (int i = 0; i < 2000; ++i) {
    const double s = scale(rng);
    const double c = conf(rng);
    const double f = k(rng);
    CHECK(reward_generated(s, c, dual) == 0.9 * c * reward_gold(s));
    CHECK(reward_generated(s, c, uniform) == c * reward_gold(s));
    CHECK(reward_generated(s, c, dual) <= 0.9 * reward_gold(s));
    CHECK(reward_gold(f * s) == doctest::Approx(f * reward_gold(s)).epsilon(1e-14));
    CHECK(reward_generated(f * s, c, dual) ==
          doctest::Approx(f * reward_generated(s, c, dual)).epsilon(1e-14));
  }
  CHECK(reward_generated(0.3, 1.0, dual) == 0.9 * reward_gold(0.3));
}
