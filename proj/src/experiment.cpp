#include "dualreward/experiment.hpp"

#include <algorithm>
#include <array>
#include <random>

#include <fmt/format.h>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

struct Topic {
  std::array<const char*, 6> cues;
  std::array<const char*, 4> answers;
  std::array<const char*, 5> distractors;  // strongest first
};

constexpr std::array<Topic, 7> kTopics = {{
    {{"magnet", "attracted", "object", "forge", "sturdy", "beam"},
     {"metal", "copper", "bronze", "tin"},
     {"wood", "plastic", "cardboard", "glass", "stone"}},
    {{"zoo", "fur", "wild", "species", "habitat", "paws"},
     {"lion", "tiger", "wolf", "bear"},
     {"eagle", "shark", "snake", "frog", "owl"}},
    {{"sky", "forecast", "clouds", "season", "storm", "wind"},
     {"rain", "snow", "hail", "fog"},
     {"sunshine", "drought", "heatwave", "breeze", "frost"}},
    {{"kitchen", "recipe", "taste", "cook", "dinner", "bake"},
     {"bread", "rice", "soup", "pasta"},
     {"salad", "cheese", "pie", "cereal", "yogurt"}},
    {{"paint", "shade", "canvas", "bright", "hue", "palette"},
     {"red", "blue", "green", "yellow"},
     {"purple", "orange", "brown", "gray", "pink"}},
    {{"team", "match", "score", "coach", "league", "stadium"},
     {"soccer", "tennis", "hockey", "rugby"},
     {"golf", "boxing", "rowing", "cycling", "skiing"}},
    {{"music", "band", "melody", "orchestra", "tune", "concert"},
     {"piano", "violin", "guitar", "drum"},
     {"flute", "harp", "trumpet", "cello", "banjo"}},
}};

constexpr std::array<const char*, 10> kFillers = {
    "the", "a", "student", "often", "said", "that", "it", "was", "likely",
    "most"};

constexpr std::array<double, 5> kDistractorWeights = {0.40, 0.25, 0.15, 0.12,
                                                      0.08};

template <typename Container>
std::size_t pick(std::mt19937_64& rng, const Container& c) {
  return std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng);
}

}  // namespace

std::span<const double> synthetic_distractor_weights() {
  return kDistractorWeights;
}

std::vector<ClozeInstance> make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_topics < 1 || cfg.n_topics > kTopics.size()) {
    throw Error(ErrorCode::kInvalidConfig,
                "n_topics must be in [1, " + std::to_string(kTopics.size()) +
                    "]");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<ClozeInstance> out;
  out.reserve(cfg.n_instances);
  for (std::size_t n = 0; n < cfg.n_instances; ++n) {
    const Topic& topic =
        kTopics[std::uniform_int_distribution<std::size_t>(
            0, cfg.n_topics - 1)(rng)];

    std::vector<std::string> words;
    std::array<std::size_t, 6> cue_order = {0, 1, 2, 3, 4, 5};
    std::shuffle(cue_order.begin(), cue_order.end(), rng);
    for (std::size_t i = 0; i < 3; ++i) words.emplace_back(topic.cues[cue_order[i]]);
    for (std::size_t i = 0; i < 3; ++i) words.emplace_back(kFillers[pick(rng, kFillers)]);
    std::shuffle(words.begin(), words.end(), rng);
    const std::size_t blank_at =
        std::uniform_int_distribution<std::size_t>(0, words.size())(rng);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(blank_at),
                 std::string(kBlankMarker));

    std::string context;
    for (const auto& w : words) {
      if (!context.empty()) context.push_back(' ');
      context += w;
    }
    context += " .";

    ClozeInstance instance;
    instance.id = fmt::format("{}-{:04d}", cfg.id_prefix, n);
    instance.context = std::move(context);
    instance.answer = topic.answers[pick(rng, topic.answers)];

    std::vector<double> weights(kDistractorWeights.begin(),
                                kDistractorWeights.end());
    for (int draw = 0; draw < 3; ++draw) {
      std::discrete_distribution<std::size_t> dist(weights.begin(),
                                                   weights.end());
      const std::size_t d = dist(rng);
      weights[d] = 0.0;
      instance.gold_distractors.emplace_back(topic.distractors[d]);
    }
    out.push_back(std::move(instance));
  }
  return out;
}

PolicyEvaluation evaluate_policy(const PolicyModel& model,
                                 std::span<const ClozeInstance> instances,
                                 const InferenceConfig& cfg) {
  PolicyEvaluation eval;
  eval.items.reserve(instances.size());
  PolicyGenerator gen(model);
  for (const auto& instance : instances) {
    EvalItem item{instance.id, instance.gold_distractors, {}};
    for (auto& t : infer(instance, model, gen, cfg.k_out, cfg.k_gen)) {
      item.predictions.push_back(std::move(t.token));
    }
    eval.items.push_back(std::move(item));
  }
  eval.report = evaluate(eval.items);
  return eval;
}

std::vector<AblationCondition> default_ablation_conditions() {
  return {
      {"adaptive-dual", ScaleMode::kAdaptive, 0.15, RewardMode::kDual},
      {"constant-0.1", ScaleMode::kConstant, 0.1, RewardMode::kDual},
      {"constant-0.15", ScaleMode::kConstant, 0.15, RewardMode::kDual},
      {"constant-0.2", ScaleMode::kConstant, 0.2, RewardMode::kDual},
      {"uniform", ScaleMode::kAdaptive, 0.15, RewardMode::kUniform},
  };
}

TrainingSetup apply_condition(TrainingSetup setup,
                              const AblationCondition& condition) {
  setup.scheduler.mode = condition.scale_mode;
  setup.scheduler.constant_scale = condition.constant_scale;
  setup.reward.mode = condition.reward_mode;
  return setup;
}

std::vector<AblationRow> run_ablation(
    std::span<const ClozeInstance> train_set,
    std::span<const CandidatePool> pools, const Vocabulary& vocab,
    std::span<const ClozeInstance> test_set, const TrainingSetup& base,
    std::span<const AblationCondition> conditions, std::uint64_t base_seed,
    std::size_t n_seeds, const InferenceConfig& inference) {
  if (n_seeds < 1) {
    throw Error(ErrorCode::kInvalidConfig, "ablation needs at least one seed");
  }
  std::vector<AblationRow> rows;
  for (const auto& condition : conditions) {
    AblationRow row{condition.name, {}, {}};
    for (std::size_t s = 0; s < n_seeds; ++s) {
      TrainingSetup setup = apply_condition(base, condition);
      setup.train.seed = base_seed + s;
      const TrainResult trained = train(train_set, pools, vocab, setup);
      row.per_seed.push_back(
          evaluate_policy(trained.model, test_set, inference).report.aggregates);
    }
    const double n = static_cast<double>(n_seeds);
    for (const auto& a : row.per_seed) {
      row.mean.p_at_1 += a.p_at_1 / n;
      row.mean.r_at_1 += a.r_at_1 / n;
      row.mean.f1_at_3 += a.f1_at_3 / n;
      row.mean.mrr_at_3 += a.mrr_at_3 / n;
      row.mean.ndcg_at_3 += a.ndcg_at_3 / n;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_table(std::ostream& out,
                          std::span<const AblationRow> rows) {
  out << fmt::format("{:<16}", "condition");
  for (auto name : kMetricNames) out << fmt::format("{:>8}", name);
  out << '\n';
  for (const auto& row : rows) {
    out << fmt::format("{:<16}", row.condition);
    for (double v : row.mean.values()) out << fmt::format("{:>8.2f}", v);
    out << '\n';
  }
}

}  // namespace dualreward
