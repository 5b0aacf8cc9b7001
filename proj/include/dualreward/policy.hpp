#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualreward/data_model.hpp"

namespace dualreward {

// Hashed bag-of-words over the context (blank excluded) plus one bucket for
// the answer token. Buckets come from 64-bit FNV-1a.
struct FeatureSpec {
  std::size_t dim = 256;

  bool operator==(const FeatureSpec&) const = default;
};

std::size_t context_bucket(std::string_view word, const FeatureSpec& spec);
std::size_t answer_bucket(std::string_view answer, const FeatureSpec& spec);

// Lowercased alphanumeric runs of the context with the blank marker removed.
std::vector<std::string> context_words(std::string_view context);

std::vector<double> featurize(const ClozeInstance& instance,
                              const FeatureSpec& spec);

// Log-probabilities are clamped below at log(kMinProbability).
inline constexpr double kMinProbability = 1e-12;

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

// Linear-softmax policy over a closed vocabulary. Parameters are stored flat:
// the vocab_size x dim weight matrix row-major, followed by the bias vector.
class PolicyModel {
 public:
  PolicyModel(Vocabulary vocab, FeatureSpec spec);

  // Weights drawn from N(0, sigma^2), bias zero.
  static PolicyModel gaussian(Vocabulary vocab, FeatureSpec spec,
                              std::uint64_t seed, double sigma = 0.01);

  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t dim() const { return spec_.dim; }
  std::size_t num_parameters() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double& weight(std::size_t label, std::size_t feature) {
    return params_[label * spec_.dim + feature];
  }
  double weight(std::size_t label, std::size_t feature) const {
    return params_[label * spec_.dim + feature];
  }
  double& bias(std::size_t label) {
    return params_[vocab_.size() * spec_.dim + label];
  }
  double bias(std::size_t label) const {
    return params_[vocab_.size() * spec_.dim + label];
  }

  std::vector<double> logits(std::span<const double> features) const;
  std::vector<double> probabilities(std::span<const double> features) const {
    return softmax(logits(features));
  }

  const Vocabulary& vocab() const { return vocab_; }
  const FeatureSpec& feature_spec() const { return spec_; }

  bool operator==(const PolicyModel& other) const {
    return vocab_ == other.vocab_ && spec_ == other.spec_ &&
           params_ == other.params_;
  }

 private:
  Vocabulary vocab_;
  FeatureSpec spec_;
  std::vector<double> params_;
};

double log_prob(const PolicyModel& model, std::span<const double> features,
                std::size_t label_index);

// Softmax probability of `token` given the instance's features.
double confidence(const PolicyModel& model, const ClozeInstance& instance,
                  std::string_view token);

// Softmax over the whole vocabulary, in vocabulary order.
std::vector<double> confidences(const PolicyModel& model,
                                const ClozeInstance& instance);

// One (s, a, reward) term. `features` is a view into storage owned by the
// caller and must outlive the example.
struct TrainingExample {
  std::string instance_id;
  std::span<const double> features;
  std::size_t label_index = 0;
  double reward = 0.0;
};

struct LossAndGradient {
  double loss = 0.0;      // -(1/N) sum reward_i * log pi(label_i | s_i)
  double mean_nll = 0.0;  // -(1/N) sum log pi(label_i | s_i), unweighted
  std::vector<double> gradient;  // same layout as PolicyModel::parameters()
};

LossAndGradient rl_loss_and_grad(const PolicyModel& model,
                                 std::span<const TrainingExample> batch);

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// Decoupled weight decay, then the bias-corrected Adam update.
void optimizer_step(PolicyModel& model, std::span<const double> gradient,
                    AdamWState& state, const AdamWConfig& cfg);

// Checkpoint container: JSON with format tag, version, vocabulary, feature
// spec and the flat parameter array. Doubles are written in shortest
// round-trip form so save -> load -> save is byte-identical.
nlohmann::json to_json(const PolicyModel& model);
PolicyModel model_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path,
                     const PolicyModel& model);
PolicyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dualreward
