#include "dualreward/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

void check_confidence(const ScoredToken& t) {
  if (!(t.confidence >= 0.0 && t.confidence <= 1.0)) {
    throw Error(ErrorCode::kConfidenceOutOfRange,
                "generator gave '" + t.token + "' confidence " +
                    std::to_string(t.confidence));
  }
}

std::vector<ScoredToken> top_k_excluding(std::vector<ScoredToken> ranked,
                                         std::size_t k,
                                         const TokenSet& exclude) {
  rank_by_confidence(ranked);
  std::vector<ScoredToken> out;
  for (auto& t : ranked) {
    if (out.size() >= k) break;
    if (exclude.count(t.token) != 0) continue;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void rank_by_confidence(std::vector<ScoredToken>& tokens) {
  std::stable_sort(tokens.begin(), tokens.end(),
                   [](const ScoredToken& a, const ScoredToken& b) {
                     if (a.confidence != b.confidence) {
                       return a.confidence > b.confidence;
                     }
                     return a.token < b.token;
                   });
}

ListGenerator::ListGenerator(std::vector<ScoredToken> ranked)
    : ranked_(std::move(ranked)) {}

std::vector<ScoredToken> ListGenerator::generate(const ClozeInstance&,
                                                 std::size_t k,
                                                 const TokenSet& exclude) {
  std::vector<ScoredToken> out;
  TokenSet emitted;
  for (const auto& t : ranked_) {
    if (out.size() >= k) break;
    const std::string key = normalize_token(t.token);
    if (exclude.count(key) != 0 || !emitted.insert(key).second) continue;
    out.push_back(t);
  }
  return out;
}

FrequencyGenerator::FrequencyGenerator(std::span<const ClozeInstance> corpus,
                                       Vocabulary vocab)
    : vocab_(std::move(vocab)), counts_(vocab_.size(), 0.0) {
  for (const auto& instance : corpus) {
    auto& own = own_[instance.id];
    for (const auto& d : instance.gold_distractors) {
      if (auto idx = vocab_.index_of(d)) {
        counts_[*idx] += 1.0;
        own.push_back(*idx);
      }
    }
  }
}

std::vector<ScoredToken> FrequencyGenerator::generate(
    const ClozeInstance& instance, std::size_t k, const TokenSet& exclude) {
  std::vector<double> scores = counts_;
  if (auto it = own_.find(instance.id); it != own_.end()) {
    for (std::size_t idx : it->second) scores[idx] -= 1.0;
  }
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  std::vector<ScoredToken> ranked;
  ranked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranked.push_back(
        {vocab_.token(i), total > 0.0 ? scores[i] / total : 0.0});
  }
  return top_k_excluding(std::move(ranked), k, exclude);
}

std::vector<ScoredToken> PolicyGenerator::generate(
    const ClozeInstance& instance, std::size_t k, const TokenSet& exclude) {
  const auto probs = confidences(model_, instance);
  std::vector<ScoredToken> ranked;
  ranked.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    ranked.push_back({model_.vocab().token(i), probs[i]});
  }
  return top_k_excluding(std::move(ranked), k, exclude);
}

CandidatePool build_pool(const ClozeInstance& instance, CandidateGenerator& gen,
                         const PoolConfig& cfg) {
  cfg.validate();
  if (instance.gold_distractors.size() != cfg.n_gold) {
    throw Error(ErrorCode::kMalformedRecord,
                "instance '" + instance.id + "' has " +
                    std::to_string(instance.gold_distractors.size()) +
                    " gold distractors, expected " +
                    std::to_string(cfg.n_gold));
  }

  CandidatePool pool;
  pool.instance_id = instance.id;
  TokenSet rejected;  // gold, answer, and everything already considered
  rejected.insert(normalize_token(instance.answer));
  for (const auto& g : instance.gold_distractors) {
    const std::string t = normalize_token(g);
    rejected.insert(t);
    pool.gold.push_back({t, Origin::kGold, std::nullopt, 0.0});
  }

  for (std::size_t round = 0; round < cfg.max_generation_rounds &&
                              pool.generated.size() < cfg.n_generated;
       ++round) {
    const std::size_t need = cfg.n_generated - pool.generated.size();
    // The first pass is unconstrained; filtering happens here.
    const auto candidates =
        gen.generate(instance, need, round == 0 ? TokenSet{} : rejected);
    for (const auto& c : candidates) {
      if (pool.generated.size() >= cfg.n_generated) break;
      check_confidence(c);
      std::string t = normalize_token(c.token);
      if (t.empty() || !rejected.insert(t).second) continue;
      pool.generated.push_back(
          {std::move(t), Origin::kGenerated, c.confidence, 0.0});
    }
  }
  if (pool.generated.size() < cfg.n_generated) {
    throw Error(ErrorCode::kGenerationExhausted,
                "instance '" + instance.id + "': only " +
                    std::to_string(pool.generated.size()) + " of " +
                    std::to_string(cfg.n_generated) +
                    " distinct candidates after " +
                    std::to_string(cfg.max_generation_rounds) + " rounds");
  }
  return pool;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) {
    throw Error(ErrorCode::kInvalidConfig, "epochs and batch_size must be >= 1");
  }
  if (!(optimizer.lr > 0.0) || !(optimizer.weight_decay >= 0.0) ||
      !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) ||
      !(optimizer.eps > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "invalid optimizer settings");
  }
}

Vocabulary training_vocabulary(std::span<const ClozeInstance> dataset,
                               std::span<const CandidatePool> pools,
                               std::span<const std::string> extra) {
  Vocabulary vocab = build_vocabulary(dataset);
  for (const auto& pool : pools) {
    for (const auto& g : pool.gold) vocab.add(g.token);
    for (const auto& c : pool.generated) vocab.add(c.token);
  }
  for (const auto& t : extra) vocab.add(t);
  return vocab;
}

TrainResult train(std::span<const ClozeInstance> dataset,
                  std::span<const CandidatePool> pools, const Vocabulary& vocab,
                  const TrainingSetup& setup) {
  setup.train.validate();
  setup.reward.validate();
  setup.pool.validate();
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no instances");

  std::unordered_map<std::string, const CandidatePool*> pool_by_id;
  for (const auto& p : pools) pool_by_id.emplace(p.instance_id, &p);

  // Frozen per-instance state: features, pool, and label indices.
  struct Item {
    const ClozeInstance* instance;
    CandidatePool pool;
    std::vector<double> features;
    std::vector<std::size_t> labels;  // gold then generated
  };
  std::vector<Item> items;
  items.reserve(dataset.size());
  for (const auto& instance : dataset) {
    auto it = pool_by_id.find(instance.id);
    if (it == pool_by_id.end()) {
      throw Error(ErrorCode::kMalformedRecord,
                  "no candidate pool for instance '" + instance.id + "'");
    }
    check_pool(*it->second, instance.answer, setup.pool);
    Item item{&instance, *it->second, featurize(instance, setup.features), {}};
    auto add_label = [&](const LabeledDistractor& d) {
      auto idx = vocab.index_of(d.token);
      if (!idx) {
        throw Error(ErrorCode::kUnknownToken,
                    "pool token '" + d.token + "' is not in the vocabulary");
      }
      item.labels.push_back(*idx);
    };
    for (const auto& g : item.pool.gold) add_label(g);
    for (const auto& c : item.pool.generated) add_label(c);
    items.push_back(std::move(item));
  }

  TrainResult result{
      setup.train.gaussian_init
          ? PolicyModel::gaussian(vocab, setup.features, setup.train.seed)
          : PolicyModel(vocab, setup.features),
      {}};
  PolicyModel& model = result.model;
  AdamWState opt_state;
  RewardScheduler scheduler(setup.scheduler);
  std::mt19937_64 rng(setup.train.seed);

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingExample> batch;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= setup.train.epochs; ++epoch) {
    if (setup.train.recompute_confidences) {
      for (auto& item : items) {
        const auto probs = model.probabilities(item.features);
        for (std::size_t g = 0; g < item.pool.generated.size(); ++g) {
          item.pool.generated[g].confidence =
              probs[item.labels[item.pool.gold.size() + g]];
        }
      }
    }
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size();
         start += setup.train.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + setup.train.batch_size);
      const double avg_loss = scheduler.effective_avg_loss();
      const double scale = scheduler.current_scale();

      batch.clear();
      for (std::size_t b = start; b < end; ++b) {
        const Item& item = items[order[b]];
        const auto labeled = assign_rewards(item.pool, scale, setup.reward);
        for (std::size_t l = 0; l < labeled.size(); ++l) {
          batch.push_back({item.instance->id, item.features, item.labels[l],
                           labeled[l].reward});
        }
      }

      const LossAndGradient lg = rl_loss_and_grad(model, batch);
      if (!std::isfinite(lg.loss) || !std::isfinite(lg.mean_nll)) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "non-finite loss at step " + std::to_string(step + 1));
      }
      optimizer_step(model, lg.gradient, opt_state, setup.train.optimizer);
      scheduler.observe(lg.mean_nll);

      ++step;
      result.trajectory.push_back({step, epoch, lg.mean_nll, avg_loss, scale});
    }
  }
  return result;
}

void write_trajectory_csv(std::ostream& out,
                          std::span<const TrajectoryRecord> records) {
  out << "step,epoch,batch_nll,avg_loss,reward_scale\n";
  for (const auto& r : records) {
    out << fmt::format("{},{},{:.9f},{:.9f},{:.9f}\n", r.step, r.epoch,
                       r.batch_nll, r.avg_loss, r.reward_scale);
  }
}

std::vector<ScoredToken> infer(const ClozeInstance& instance,
                               const ConfidenceFn& score,
                               CandidateGenerator& gen, std::size_t k_out,
                               std::size_t k_gen) {
  const std::string answer = normalize_token(instance.answer);
  TokenSet seen{answer};
  std::vector<std::string> survivors;
  auto absorb = [&](const std::vector<ScoredToken>& candidates) {
    for (const auto& c : candidates) {
      std::string t = normalize_token(c.token);
      if (t.empty() || !seen.insert(t).second) continue;
      survivors.push_back(std::move(t));
    }
  };

  absorb(gen.generate(instance, k_gen, {}));
  if (survivors.size() < k_out) absorb(gen.generate(instance, k_gen, seen));
  if (survivors.size() < k_out) {
    throw Error(ErrorCode::kInsufficientCandidates,
                "instance '" + instance.id + "': " +
                    std::to_string(survivors.size()) + " candidates, need " +
                    std::to_string(k_out));
  }

  std::vector<ScoredToken> ranked;
  ranked.reserve(survivors.size());
  for (auto& t : survivors) {
    const double c = score(t);
    ranked.push_back({std::move(t), c});
  }
  rank_by_confidence(ranked);
  ranked.resize(k_out);
  return ranked;
}

std::vector<ScoredToken> infer(const ClozeInstance& instance,
                               const PolicyModel& model,
                               CandidateGenerator& gen, std::size_t k_out,
                               std::size_t k_gen) {
  const auto probs = confidences(model, instance);
  auto score = [&](const std::string& token) {
    auto idx = model.vocab().index_of(token);
    if (!idx) {
      throw Error(ErrorCode::kUnknownToken,
                  "'" + token + "' is not in the vocabulary");
    }
    return probs[*idx];
  };
  return infer(instance, score, gen, k_out, k_gen);
}

}  // namespace dualreward
