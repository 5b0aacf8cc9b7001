#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dualreward/data_model.hpp"
#include "dualreward/experiment.hpp"
#include "dualreward/pipeline.hpp"

namespace dualreward {

// Flat key -> value view of every tunable. Values stay in their textual form
// so an effective config can be written back out verbatim.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap default_config();

// key=value lines; '#' starts a comment; blank lines ignored. Unknown keys
// throw Error(kInvalidConfig).
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);

// Later maps win. Keys must already exist in `base`.
void merge_config(ConfigMap& base, const ConfigMap& overrides);

std::string format_config(const ConfigMap& config);

enum class GeneratorKind { kFrequency, kPolicy };

struct RunConfig {
  TrainingSetup setup;
  InferenceConfig inference;
  GeneratorKind pool_generator = GeneratorKind::kFrequency;
  GeneratorKind infer_generator = GeneratorKind::kPolicy;
  ParseMode parse_mode = ParseMode::kStrict;
  std::size_t ablation_seeds = 1;
  std::uint64_t seed = 0;
  ConfigMap effective;
};

// Typed view with every module's invariants checked.
RunConfig resolve_config(const ConfigMap& config);

}  // namespace dualreward
