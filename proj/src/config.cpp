#include "dualreward/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

std::string_view strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw Error(ErrorCode::kInvalidConfig,
              key + "=" + value + " (expected " + expected + ")");
}

double get_double(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

std::uint64_t get_uint(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

bool get_bool(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true|false");
}

GeneratorKind get_generator(const ConfigMap& c, const std::string& key) {
  const std::string& v = c.at(key);
  if (v == "frequency") return GeneratorKind::kFrequency;
  if (v == "policy") return GeneratorKind::kPolicy;
  bad_value(key, v, "frequency|policy");
}

}  // namespace

ConfigMap default_config() {
  return {
      {"epochs", "20"},
      {"batch_size", "8"},
      {"lr", "1e-4"},
      {"weight_decay", "0.01"},
      {"base_scale", "0.1"},
      {"max_scale", "0.2"},
      {"alpha", "5.0"},
      {"threshold", "1.0"},
      {"scale_mode", "adaptive"},
      {"constant_scale", "0.15"},
      {"loss_window", "100"},
      {"reward_mode", "dual"},
      {"gen_coefficient", "0.9"},
      {"n_gold", "3"},
      {"n_generated", "7"},
      {"max_generation_rounds", "10"},
      {"feature_dim", "256"},
      {"init", "zeros"},
      {"recompute_confidences", "false"},
      {"pool_generator", "frequency"},
      {"infer_generator", "policy"},
      {"k_out", "3"},
      {"k_gen", "10"},
      {"parse_mode", "strict"},
      {"ablation_seeds", "1"},
      {"seed", "0"},
  };
}

ConfigMap parse_config_text(std::string_view text) {
  const ConfigMap known = default_config();
  ConfigMap out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "config line " + std::to_string(line_no) + ": missing '='");
    }
    std::string key(strip(line.substr(0, eq)));
    std::string value(strip(line.substr(eq + 1)));
    if (known.count(key) == 0) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void merge_config(ConfigMap& base, const ConfigMap& overrides) {
  for (const auto& [key, value] : overrides) {
    if (base.count(key) == 0) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
    }
    base[key] = value;
  }
}

std::string format_config(const ConfigMap& config) {
  std::string out;
  for (const auto& [key, value] : config) out += key + "=" + value + "\n";
  return out;
}

RunConfig resolve_config(const ConfigMap& config) {
  ConfigMap c = default_config();
  merge_config(c, config);

  RunConfig run;
  run.effective = c;
  run.seed = get_uint(c, "seed");

  auto& sched = run.setup.scheduler;
  sched.base_scale = get_double(c, "base_scale");
  sched.max_scale = get_double(c, "max_scale");
  sched.alpha = get_double(c, "alpha");
  sched.threshold = get_double(c, "threshold");
  sched.constant_scale = get_double(c, "constant_scale");
  sched.loss_window = get_uint(c, "loss_window");
  if (c["scale_mode"] == "adaptive") {
    sched.mode = ScaleMode::kAdaptive;
  } else if (c["scale_mode"] == "constant") {
    sched.mode = ScaleMode::kConstant;
  } else {
    bad_value("scale_mode", c["scale_mode"], "adaptive|constant");
  }
  sched.validate();

  auto& reward = run.setup.reward;
  reward.gen_coefficient = get_double(c, "gen_coefficient");
  if (c["reward_mode"] == "dual") {
    reward.mode = RewardMode::kDual;
  } else if (c["reward_mode"] == "uniform") {
    reward.mode = RewardMode::kUniform;
  } else {
    bad_value("reward_mode", c["reward_mode"], "dual|uniform");
  }
  reward.validate();

  auto& pool = run.setup.pool;
  pool.n_gold = get_uint(c, "n_gold");
  pool.n_generated = get_uint(c, "n_generated");
  pool.max_generation_rounds = get_uint(c, "max_generation_rounds");
  pool.validate();

  run.setup.features.dim = get_uint(c, "feature_dim");
  if (run.setup.features.dim < 1) bad_value("feature_dim", c["feature_dim"], ">= 1");

  auto& tr = run.setup.train;
  tr.epochs = get_uint(c, "epochs");
  tr.batch_size = get_uint(c, "batch_size");
  tr.optimizer.lr = get_double(c, "lr");
  tr.optimizer.weight_decay = get_double(c, "weight_decay");
  tr.seed = run.seed;
  tr.recompute_confidences = get_bool(c, "recompute_confidences");
  if (c["init"] == "zeros") {
    tr.gaussian_init = false;
  } else if (c["init"] == "gaussian") {
    tr.gaussian_init = true;
  } else {
    bad_value("init", c["init"], "zeros|gaussian");
  }
  tr.validate();

  run.pool_generator = get_generator(c, "pool_generator");
  run.infer_generator = get_generator(c, "infer_generator");
  run.inference.k_out = get_uint(c, "k_out");
  run.inference.k_gen = get_uint(c, "k_gen");
  if (run.inference.k_out < 1 || run.inference.k_gen < 1) {
    throw Error(ErrorCode::kInvalidConfig, "k_out and k_gen must be >= 1");
  }
  if (c["parse_mode"] == "strict") {
    run.parse_mode = ParseMode::kStrict;
  } else if (c["parse_mode"] == "lenient") {
    run.parse_mode = ParseMode::kLenient;
  } else {
    bad_value("parse_mode", c["parse_mode"], "strict|lenient");
  }
  run.ablation_seeds = get_uint(c, "ablation_seeds");
  if (run.ablation_seeds < 1) bad_value("ablation_seeds", c["ablation_seeds"], ">= 1");
  return run;
}

}  // namespace dualreward
