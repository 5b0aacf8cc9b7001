#include "dualreward/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::string_view kCheckpointFormat = "dualreward-policy";
constexpr int kCheckpointVersion = 1;

std::uint64_t fnv1a(std::string_view prefix, std::string_view text) {
  std::uint64_t h = kFnvOffset;
  for (char c : prefix) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

void check_features(const PolicyModel& model,
                    std::span<const double> features) {
  if (features.size() != model.dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "feature vector has length " + std::to_string(features.size()) +
                    ", model expects " + std::to_string(model.dim()));
  }
}

}  // namespace

std::size_t context_bucket(std::string_view word, const FeatureSpec& spec) {
  return static_cast<std::size_t>(fnv1a("w:", word) % spec.dim);
}

std::size_t answer_bucket(std::string_view answer, const FeatureSpec& spec) {
  return static_cast<std::size_t>(fnv1a("a:", answer) % spec.dim);
}

std::vector<std::string> context_words(std::string_view context) {
  std::string text(context);
  for (std::size_t pos = text.find(kBlankMarker); pos != std::string::npos;
       pos = text.find(kBlankMarker, pos)) {
    text.replace(pos, kBlankMarker.size(), " ");
  }
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    // Bytes >= 0x80 belong to UTF-8 sequences and stay inside words.
    if (std::isalnum(uc) || uc >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<double> featurize(const ClozeInstance& instance,
                              const FeatureSpec& spec) {
  if (spec.dim == 0) {
    throw Error(ErrorCode::kInvalidConfig, "feature dim must be >= 1");
  }
  std::vector<double> x(spec.dim, 0.0);
  for (const auto& w : context_words(instance.context)) {
    x[context_bucket(w, spec)] += 1.0;
  }
  x[answer_bucket(instance.answer, spec)] += 1.0;
  return x;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - mx);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = logits[j] - lse;
  return out;
}

PolicyModel::PolicyModel(Vocabulary vocab, FeatureSpec spec)
    : vocab_(std::move(vocab)), spec_(spec) {
  if (spec_.dim == 0) {
    throw Error(ErrorCode::kInvalidConfig, "feature dim must be >= 1");
  }
  params_.assign(vocab_.size() * spec_.dim + vocab_.size(), 0.0);
}

PolicyModel PolicyModel::gaussian(Vocabulary vocab, FeatureSpec spec,
                                  std::uint64_t seed, double sigma) {
  PolicyModel model(std::move(vocab), spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  const std::size_t n_weights = model.vocab_size() * model.dim();
  for (std::size_t i = 0; i < n_weights; ++i) model.params_[i] = normal(rng);
  return model;
}

std::vector<double> PolicyModel::logits(
    std::span<const double> features) const {
  check_features(*this, features);
  std::vector<std::size_t> active;
  for (std::size_t d = 0; d < features.size(); ++d) {
    if (features[d] != 0.0) active.push_back(d);
  }
  const std::size_t vocab_n = vocab_size();
  std::vector<double> z(vocab_n);
  for (std::size_t j = 0; j < vocab_n; ++j) {
    double acc = bias(j);
    const double* row = params_.data() + j * spec_.dim;
    for (std::size_t d : active) acc += row[d] * features[d];
    z[j] = acc;
  }
  return z;
}

double log_prob(const PolicyModel& model, std::span<const double> features,
                std::size_t label_index) {
  if (label_index >= model.vocab_size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "label " + std::to_string(label_index) + " >= vocab size " +
                    std::to_string(model.vocab_size()));
  }
  const auto lp = log_softmax(model.logits(features));
  return std::max(lp[label_index], std::log(kMinProbability));
}

double confidence(const PolicyModel& model, const ClozeInstance& instance,
                  std::string_view token) {
  const auto index = model.vocab().index_of(normalize_token(token));
  if (!index) {
    throw Error(ErrorCode::kUnknownToken,
                "'" + std::string(token) + "' is not in the vocabulary");
  }
  return confidences(model, instance)[*index];
}

std::vector<double> confidences(const PolicyModel& model,
                                const ClozeInstance& instance) {
  return model.probabilities(featurize(instance, model.feature_spec()));
}

LossAndGradient rl_loss_and_grad(const PolicyModel& model,
                                 std::span<const TrainingExample> batch) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyBatch, "empty batch");
  const auto params = model.parameters();
  for (double p : params) {
    if (!std::isfinite(p)) {
      throw Error(ErrorCode::kNonFiniteParameters,
                  "model has non-finite parameters");
    }
  }

  const std::size_t vocab_n = model.vocab_size();
  const std::size_t dim = model.dim();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double log_floor = std::log(kMinProbability);

  LossAndGradient out;
  out.gradient.assign(params.size(), 0.0);
  double* grad_w = out.gradient.data();
  double* grad_b = out.gradient.data() + vocab_n * dim;

  std::vector<std::size_t> active;
  for (const auto& ex : batch) {
    if (ex.label_index >= vocab_n) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "label " + std::to_string(ex.label_index) + " in example '" +
                      ex.instance_id + "'");
    }
    const auto z = model.logits(ex.features);
    const auto lp = log_softmax(z);
    double label_lp = lp[ex.label_index];
    const bool clamped = label_lp < log_floor;
    if (clamped) label_lp = log_floor;

    out.loss -= ex.reward * label_lp * inv_n;
    out.mean_nll -= label_lp * inv_n;

    // The clamp is flat, so clamped examples contribute no gradient.
    if (clamped || ex.reward == 0.0) continue;

    active.clear();
    for (std::size_t d = 0; d < dim; ++d) {
      if (ex.features[d] != 0.0) active.push_back(d);
    }
    const double w = ex.reward * inv_n;
    for (std::size_t j = 0; j < vocab_n; ++j) {
      const double g =
          w * (std::exp(lp[j]) - (j == ex.label_index ? 1.0 : 0.0));
      grad_b[j] += g;
      double* row = grad_w + j * dim;
      for (std::size_t d : active) row[d] += g * ex.features[d];
    }
  }
  return out;
}

void optimizer_step(PolicyModel& model, std::span<const double> gradient,
                    AdamWState& state, const AdamWConfig& cfg) {
  auto params = model.parameters();
  if (gradient.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "gradient has " + std::to_string(gradient.size()) +
                    " entries, model has " + std::to_string(params.size()));
  }
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "optimizer state does not match the model");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.lr * cfg.weight_decay * params[i];
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

nlohmann::json to_json(const PolicyModel& model) {
  return nlohmann::json{
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"feature_spec", {{"dim", model.dim()}, {"hash", "fnv1a64"}}},
      {"vocab", model.vocab().tokens()},
      {"parameters",
       std::vector<double>(model.parameters().begin(),
                           model.parameters().end())},
  };
}

PolicyModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat ||
        doc.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::kMalformedRecord,
                  "unsupported checkpoint format or version");
    }
    FeatureSpec spec{doc.at("feature_spec").at("dim").get<std::size_t>()};
    const auto tokens = doc.at("vocab").get<std::vector<std::string>>();
    Vocabulary vocab(tokens);
    if (vocab.size() != tokens.size()) {
      throw Error(ErrorCode::kMalformedRecord,
                  "checkpoint vocabulary is not normalized and distinct");
    }
    PolicyModel model(std::move(vocab), spec);
    const auto params = doc.at("parameters").get<std::vector<double>>();
    if (params.size() != model.num_parameters()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "checkpoint has " + std::to_string(params.size()) +
                      " parameters, expected " +
                      std::to_string(model.num_parameters()));
    }
    std::copy(params.begin(), params.end(), model.parameters().begin());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord,
                std::string("bad checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     const PolicyModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord,
                path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace dualreward
