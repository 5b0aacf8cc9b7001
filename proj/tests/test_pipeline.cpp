#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "dualreward/error.hpp"
#include "dualreward/experiment.hpp"
#include "dualreward/pipeline.hpp"

using namespace dualreward;

namespace {

ClozeInstance magnet_item() {
  return {"t1",
          "If an object is attracted to a magnet, the object is most likely "
          "made of [BLANK].",
          "metal",
          {"wood", "plastic", "cardboard"}};
}

std::vector<ScoredToken> scored(std::initializer_list<const char*> tokens) {
  std::vector<ScoredToken> out;
  double c = 0.9;
  for (const char* t : tokens) {
    out.push_back({t, c});
    c = std::max(0.0, c - 0.05);
  }
  return out;
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("build_pool on the magnet example") {
  ListGenerator gen(scored({"wood", "plastic", "glass", "stone", "steel",
                            "aluminum", "clay", "iron", "rubber"}));
  const ClozeInstance inst = magnet_item();
  const CandidatePool pool = build_pool(inst, gen, PoolConfig{});
  CHECK(pool.size() == 10);
  REQUIRE(pool.gold.size() == 3);
  CHECK(pool.gold[0].token == "wood");
  std::vector<std::string> generated;
  for (const auto& c : pool.generated) {
    generated.push_back(c.token);
    CHECK(c.origin == Origin::kGenerated);
    CHECK(c.confidence.has_value());
  }
  CHECK(generated == std::vector<std::string>{"glass", "stone", "steel",
                                              "aluminum", "clay", "iron",
                                              "rubber"});
  CHECK_NOTHROW(check_pool(pool, inst.answer, PoolConfig{}));
}

TEST_CASE("build_pool filters the answer") {
  ListGenerator gen(scored({"Metal", "wood", "glass", "stone", "steel",
                            "aluminum", "clay", "iron", "rubber", "copper"}));
  const CandidatePool pool = build_pool(magnet_item(), gen, PoolConfig{});
  for (const auto& c : pool.generated) CHECK(c.token != "metal");
  CHECK(pool.generated.size() == 7);
}

TEST_CASE("build_pool exhausts on a small generator") {
  ListGenerator gen(scored({"wood", "glass", "stone", "steel", "clay", "iron",
                            "glass"}));
  CHECK(code_of([&] { build_pool(magnet_item(), gen, PoolConfig{}); }) ==
        ErrorCode::kGenerationExhausted);
}

TEST_CASE("build_pool rejects bad confidences and gold counts") {
  ListGenerator gen({{"glass", 1.5}});
  CHECK(code_of([&] { build_pool(magnet_item(), gen, PoolConfig{}); }) ==
        ErrorCode::kConfidenceOutOfRange);
  ListGenerator fine(scored({"a", "b", "c", "d", "e", "f", "g"}));
  ClozeInstance two = magnet_item();
  two.gold_distractors.pop_back();
  CHECK(code_of([&] { build_pool(two, fine, PoolConfig{}); }) ==
        ErrorCode::kMalformedRecord);
}

TEST_CASE("pool invariants hold for random generators") {
  std::mt19937_64 rng(29);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f", "g",
                                          "h", "i", "j", "k", "metal", "wood",
                                          "plastic", "cardboard"};
  int built = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ScoredToken> list;
    const std::size_t n = rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      list.push_back({words[rng() % words.size()],
                      static_cast<double>(rng() % 1000) / 1000.0});
    }
    ListGenerator gen(list);
    try {
      const auto pool = build_pool(magnet_item(), gen, PoolConfig{});
      CHECK_NOTHROW(check_pool(pool, "metal", PoolConfig{}));
      ++built;
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kGenerationExhausted);
    }
  }
  CHECK(built > 0);
}

TEST_CASE("frequency generator counts other instances only") {
  const std::vector<ClozeInstance> corpus = {
      {"a", "x [BLANK]", "metal", {"wood", "plastic", "glass"}},
      {"b", "y [BLANK]", "metal", {"wood", "stone", "glass"}},
      {"c", "z [BLANK]", "snow", {"wood", "rain", "hail"}},
  };
  FrequencyGenerator gen(corpus, build_vocabulary(corpus));
  const auto out = gen.generate(corpus[0], 3, {});
  // Other instances: wood x2, stone, glass, rain, hail -> total 6.
  REQUIRE(out.size() == 3);
  CHECK(out[0] == ScoredToken{"wood", 2.0 / 6.0});
  CHECK(out[1] == ScoredToken{"glass", 1.0 / 6.0});
  CHECK(out[2] == ScoredToken{"hail", 1.0 / 6.0});
  const auto excl = gen.generate(corpus[0], 2, {"wood", "glass"});
  CHECK(excl[0].token == "hail");
  CHECK(excl[1].token == "rain");
}

TEST_CASE("infer examples") {
  const ClozeInstance inst = magnet_item();
  const std::map<std::string, double> conf = {
      {"glass", 0.3}, {"stone", 0.2}, {"wood", 0.1}, {"metal", 0.9}};
  auto score = [&](const std::string& t) { return conf.at(t); };

  ListGenerator gen({{"metal", 0.9},
                     {"glass", 0.3},
                     {"glass", 0.3},
                     {"stone", 0.2},
                     {"wood", 0.1}});
  // The list generator collapses repeats itself, so feed the repeat through a
  // raw generator too.
  struct Raw : CandidateGenerator {
    std::vector<ScoredToken> generate(const ClozeInstance&, std::size_t,
                                      const TokenSet& exclude) override {
      std::vector<ScoredToken> out;
      for (const char* t : {"metal", "glass", "glass", "stone", "wood"}) {
        if (!exclude.count(t)) out.push_back({t, 0.5});
      }
      return out;
    }
  } raw;
  for (CandidateGenerator* g : {static_cast<CandidateGenerator*>(&gen),
                                static_cast<CandidateGenerator*>(&raw)}) {
    const auto out = infer(inst, score, *g);
    REQUIRE(out.size() == 3);
    CHECK(out[0].token == "glass");
    CHECK(out[1].token == "stone");
    CHECK(out[2].token == "wood");
  }

  auto flat = [](const std::string&) { return 0.2; };
  ListGenerator ties({{"bone", 0.2}, {"ash", 0.2}, {"cat", 0.2}});
  const auto tied = infer(inst, flat, ties);
  CHECK(tied[0].token == "ash");
  CHECK(tied[1].token == "bone");

  ListGenerator tiny({{"metal", 0.5}, {"glass", 0.4}});
  CHECK(code_of([&] { infer(inst, score, tiny); }) ==
        ErrorCode::kInsufficientCandidates);
}

TEST_CASE("infer output contract on random inputs") {
  std::mt19937_64 rng(31);
  const std::vector<std::string> words = {"ash", "bone", "cat", "dog", "elm",
                                          "fig", "gum", "hay", "ivy", "jam",
                                          "metal"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<ScoredToken> list;
    for (int i = 0; i < 10; ++i) {
      list.push_back({words[rng() % words.size()], 0.0});
    }
    std::map<std::string, double> conf;
    for (const auto& w : words) conf[w] = static_cast<double>(rng() % 4) / 4.0;
    struct Raw : CandidateGenerator {
      std::vector<ScoredToken> items;
      std::vector<ScoredToken> generate(const ClozeInstance&, std::size_t,
                                        const TokenSet& exclude) override {
        std::vector<ScoredToken> out;
        for (const auto& t : items) {
          if (!exclude.count(t.token)) out.push_back(t);
        }
        return out;
      }
    } raw;
    raw.items = list;
    try {
      const auto out = infer(magnet_item(), [&](const std::string& t) {
        return conf.at(t);
      }, raw);
      REQUIRE(out.size() == 3);
      std::set<std::string> distinct;
      for (std::size_t i = 0; i < out.size(); ++i) {
        distinct.insert(out[i].token);
        CHECK(out[i].token != "metal");
        if (i > 0) {
          CHECK(out[i - 1].confidence >= out[i].confidence);
          if (out[i - 1].confidence == out[i].confidence) {
            CHECK(out[i - 1].token < out[i].token);
          }
        }
      }
      CHECK(distinct.size() == 3);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInsufficientCandidates);
    }
  }
}

TEST_CASE("train: determinism, constant mode, trajectory consistency") {
  const auto data = make_synthetic_dataset({60, 3, 4, "p"});
  FrequencyGenerator gen(data, build_vocabulary(data));
  std::vector<CandidatePool> pools;
  for (const auto& inst : data) pools.push_back(build_pool(inst, gen, {}));
  const Vocabulary vocab = training_vocabulary(data, pools);

  TrainingSetup setup;
  setup.train.epochs = 3;
  setup.train.seed = 5;

  const TrainResult a = train(data, pools, vocab, setup);
  const TrainResult b = train(data, pools, vocab, setup);
  CHECK(a.trajectory == b.trajectory);
  CHECK(a.model == b.model);
  CHECK(a.trajectory.size() == 3 * 8);  // ceil(60 / 8) batches per epoch
  CHECK(a.trajectory.front().avg_loss == setup.scheduler.threshold);
  for (const auto& r : a.trajectory) {
    CHECK(std::abs(r.reward_scale - scale_for_loss(r.avg_loss, setup.scheduler)) <
          1e-15);
  }

  std::ostringstream csv_a, csv_b;
  write_trajectory_csv(csv_a, a.trajectory);
  write_trajectory_csv(csv_b, b.trajectory);
  CHECK(csv_a.str() == csv_b.str());
  CHECK(csv_a.str().rfind("step,epoch,batch_nll,avg_loss,reward_scale\n", 0) == 0);

  TrainingSetup constant = setup;
  constant.scheduler.mode = ScaleMode::kConstant;
  constant.scheduler.constant_scale = 0.1;
  const TrainResult c = train(data, pools, vocab, constant);
  for (const auto& r : c.trajectory) CHECK(r.reward_scale == 0.1);

  TrainingSetup other_seed = setup;
  other_seed.train.seed = 6;
  CHECK_FALSE(train(data, pools, vocab, other_seed).trajectory == a.trajectory);
}

TEST_CASE("train: decreasing loss gives a non-increasing scale") {
  // One instance, one batch per epoch and equal rewards on every label, so
  // the NLL falls every step.
  const std::vector<ClozeInstance> data = {magnet_item()};
  std::vector<ScoredToken> certain;
  for (const char* t : {"glass", "stone", "steel", "aluminum", "clay", "iron",
                        "rubber"}) {
    certain.push_back({t, 1.0});
  }
  ListGenerator gen(certain);
  const std::vector<CandidatePool> pools = {build_pool(data[0], gen, {})};
  const Vocabulary vocab = training_vocabulary(data, pools);
  TrainingSetup setup;
  setup.reward.mode = RewardMode::kUniform;
  setup.train.epochs = 30;
  setup.train.optimizer.lr = 1e-2;
  const TrainResult r = train(data, pools, vocab, setup);
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
    REQUIRE(r.trajectory[i].batch_nll < r.trajectory[i - 1].batch_nll);
  }
  for (std::size_t i = 2; i < r.trajectory.size(); ++i) {
    CHECK(r.trajectory[i].reward_scale <= r.trajectory[i - 1].reward_scale);
  }
}

TEST_CASE("train error paths") {
  const std::vector<ClozeInstance> data = {magnet_item()};
  const Vocabulary vocab = build_vocabulary(data);
  CHECK(code_of([&] {
          train(data, std::vector<CandidatePool>{}, vocab, TrainingSetup{});
        }) == ErrorCode::kMalformedRecord);
  ListGenerator gen(scored({"glass", "stone", "steel", "aluminum", "clay",
                            "iron", "rubber"}));
  const std::vector<CandidatePool> pools = {build_pool(data[0], gen, {})};
  CHECK(code_of([&] { train(data, pools, vocab, TrainingSetup{}); }) ==
        ErrorCode::kUnknownToken);
  CHECK(code_of([&] {
          train(std::vector<ClozeInstance>{}, pools, vocab, TrainingSetup{});
        }) == ErrorCode::kEmptyDataset);
}

TEST_CASE("recomputed confidences still train deterministically") {
  const auto data = make_synthetic_dataset({40, 2, 8, "q"});
  FrequencyGenerator gen(data, build_vocabulary(data));
  std::vector<CandidatePool> pools;
  for (const auto& inst : data) pools.push_back(build_pool(inst, gen, {}));
  const Vocabulary vocab = training_vocabulary(data, pools);
  TrainingSetup setup;
  setup.train.epochs = 2;
  setup.train.recompute_confidences = true;
  const auto a = train(data, pools, vocab, setup);
  const auto b = train(data, pools, vocab, setup);
  CHECK(a.model == b.model);
  setup.train.recompute_confidences = false;
  CHECK_FALSE(train(data, pools, vocab, setup).model == a.model);
}
