#include "dualreward/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dualreward/config.hpp"
#include "dualreward/error.hpp"
#include "dualreward/experiment.hpp"
#include "dualreward/metrics.hpp"
#include "dualreward/pipeline.hpp"

namespace dualreward::cli {
namespace {

namespace fs = std::filesystem;

struct Paths {
  std::string config;
  std::string data;
  std::string pools;
  std::string dev;
  std::string test;
  std::string checkpoint;
  std::string predictions;
  std::string extra_vocab;
  std::string out_dir;
};

struct Invocation {
  std::string command;
  Paths paths;
  ConfigMap overrides;
};

int exit_code_for(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::kUsage: return kExitUsage;
    case ErrorClass::kData: return kExitData;
    case ErrorClass::kNumerical: return kExitNumerical;
  }
  return kExitUsage;
}

void require_readable(const std::string& path, const char* what) {
  if (path.empty()) {
    throw Error(ErrorCode::kIoError, std::string("missing --") + what);
  }
  std::ifstream probe(path);
  if (!probe) {
    throw Error(ErrorCode::kIoError,
                std::string("cannot read ") + what + " file " + path);
  }
}

fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw Error(ErrorCode::kIoError, "missing --out-dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "cannot create output directory " + dir);
  }
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
}

std::vector<std::string> read_token_list(const std::string& path) {
  std::vector<std::string> tokens;
  if (path.empty()) return tokens;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = normalize_token(line);
    if (!t.empty()) tokens.push_back(std::move(t));
  }
  return tokens;
}

Dataset read_dataset(const std::string& path, const RunConfig& run,
                     std::ostream& err) {
  Dataset ds = load_dataset(path, NormalizationPolicy{}, run.parse_mode,
                            run.setup.pool.n_gold);
  for (const auto& e : ds.errors) {
    err << path << ":" << e.line << ": " << e.message << '\n';
  }
  return ds;
}

nlohmann::json manifest_base(const Invocation& inv, const RunConfig& run) {
  nlohmann::json inputs = nlohmann::json::object();
  const std::map<std::string, std::string> named = {
      {"config", inv.paths.config},         {"data", inv.paths.data},
      {"pools", inv.paths.pools},           {"dev", inv.paths.dev},
      {"test", inv.paths.test},             {"checkpoint", inv.paths.checkpoint},
      {"predictions", inv.paths.predictions},
      {"extra_vocab", inv.paths.extra_vocab}};
  for (const auto& [k, v] : named) {
    if (!v.empty()) inputs[k] = v;
  }
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : run.effective) config[k] = v;
  return {
      {"command", inv.command},
      {"seed", run.seed},
      {"config", config},
      {"effective",
       {{"gen_coefficient", run.setup.reward.effective_coefficient()}}},
      {"inputs", inputs},
  };
}

void write_manifest(const fs::path& out_dir, const nlohmann::json& manifest,
                    const RunConfig& run) {
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(out_dir / "effective.conf", format_config(run.effective));
}

std::unique_ptr<CandidateGenerator> make_generator(
    GeneratorKind kind, std::span<const ClozeInstance> corpus,
    const Vocabulary& vocab, const PolicyModel* model) {
  if (kind == GeneratorKind::kPolicy) {
    if (model == nullptr) {
      throw Error(ErrorCode::kInvalidConfig,
                  "the policy generator needs --checkpoint");
    }
    return std::make_unique<PolicyGenerator>(*model);
  }
  return std::make_unique<FrequencyGenerator>(corpus, vocab);
}

struct PoolBuild {
  std::vector<CandidatePool> pools;
  std::vector<std::string> skipped;
};

PoolBuild build_pools(std::span<const ClozeInstance> instances,
                      CandidateGenerator& gen, const PoolConfig& cfg,
                      std::ostream& err) {
  PoolBuild out;
  for (const auto& instance : instances) {
    try {
      out.pools.push_back(build_pool(instance, gen, cfg));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kGenerationExhausted) throw;
      err << "skipped " << instance.id << ": " << e.what() << '\n';
      out.skipped.push_back(instance.id);
    }
  }
  return out;
}

// Instances that have a pool, in dataset order.
std::vector<ClozeInstance> with_pools(std::vector<ClozeInstance> instances,
                                      std::span<const CandidatePool> pools,
                                      std::ostream& err) {
  std::unordered_map<std::string, bool> has;
  for (const auto& p : pools) has[p.instance_id] = true;
  std::vector<ClozeInstance> kept;
  for (auto& instance : instances) {
    if (has.count(instance.id) != 0) {
      kept.push_back(std::move(instance));
    } else {
      err << "no pool for " << instance.id << "; left out of training\n";
    }
  }
  return kept;
}

struct TrainingInputs {
  std::vector<ClozeInstance> train_set;
  std::vector<CandidatePool> pools;
  Vocabulary vocab;
};

TrainingInputs prepare_training(const Invocation& inv, const RunConfig& run,
                                std::ostream& err) {
  TrainingInputs in;
  auto dataset = read_dataset(inv.paths.data, run, err).instances;
  const auto extra = read_token_list(inv.paths.extra_vocab);
  if (!inv.paths.pools.empty()) {
    in.pools = load_pools(inv.paths.pools);
  } else {
    FrequencyGenerator gen(dataset, build_vocabulary(dataset, extra));
    in.pools = build_pools(dataset, gen, run.setup.pool, err).pools;
  }
  in.train_set = with_pools(std::move(dataset), in.pools, err);
  if (in.train_set.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no trainable instances");
  }
  in.vocab = training_vocabulary(in.train_set, in.pools, extra);
  return in;
}

std::vector<EvalItem> infer_all(std::span<const ClozeInstance> instances,
                                const PolicyModel& model, const RunConfig& run) {
  auto gen = make_generator(run.infer_generator, instances, model.vocab(),
                            &model);
  std::vector<EvalItem> items;
  items.reserve(instances.size());
  for (const auto& instance : instances) {
    EvalItem item{instance.id, instance.gold_distractors, {}};
    for (auto& t : infer(instance, model, *gen, run.inference.k_out,
                         run.inference.k_gen)) {
      item.predictions.push_back(std::move(t.token));
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string predictions_jsonl(std::span<const EvalItem> items) {
  std::string out;
  for (const auto& item : items) {
    out += nlohmann::json{{"id", item.instance_id},
                          {"predictions", item.predictions}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<EvalItem> read_predictions(const std::string& path,
                                       std::span<const ClozeInstance> gold) {
  std::unordered_map<std::string, const ClozeInstance*> by_id;
  for (const auto& g : gold) by_id[g.id] = &g;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<EvalItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      const auto id = rec.at("id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw Error(ErrorCode::kMalformedRecord,
                    "prediction for unknown id '" + id + "'");
      }
      EvalItem item{id, it->second->gold_distractors, {}};
      for (const auto& p : rec.at("predictions")) {
        item.predictions.push_back(normalize_token(p.get<std::string>()));
      }
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

int cmd_gen_data(const Invocation& inv, const RunConfig& run,
                 std::ostream& out, std::ostream& err) {
  require_readable(inv.paths.data, "data");
  if (!inv.paths.extra_vocab.empty()) {
    require_readable(inv.paths.extra_vocab, "extra-vocab");
  }
  std::optional<PolicyModel> model;
  if (run.pool_generator == GeneratorKind::kPolicy) {
    require_readable(inv.paths.checkpoint, "checkpoint");
  }
  const fs::path out_dir = prepare_out_dir(inv.paths.out_dir);
  if (run.pool_generator == GeneratorKind::kPolicy) {
    model = load_checkpoint(inv.paths.checkpoint);
  }

  const auto dataset = read_dataset(inv.paths.data, run, err).instances;
  const auto extra = read_token_list(inv.paths.extra_vocab);
  const Vocabulary vocab = build_vocabulary(dataset, extra);
  auto gen = make_generator(run.pool_generator, dataset, vocab,
                            model ? &*model : nullptr);
  const PoolBuild built = build_pools(dataset, *gen, run.setup.pool, err);
  save_pools(out_dir / "pools.jsonl", built.pools);

  nlohmann::json manifest = manifest_base(inv, run);
  manifest["outputs"] = {{"pools", (out_dir / "pools.jsonl").string()}};
  manifest["summary"] = {{"instances", dataset.size()},
                         {"pools", built.pools.size()},
                         {"skipped", built.skipped}};
  write_manifest(out_dir, manifest, run);

  out << fmt::format("gen-data: instances={} pools={} skipped={}\n",
                     dataset.size(), built.pools.size(), built.skipped.size());
  return kExitOk;
}

int cmd_train(const Invocation& inv, const RunConfig& run, std::ostream& out,
              std::ostream& err) {
  require_readable(inv.paths.data, "data");
  if (!inv.paths.pools.empty()) require_readable(inv.paths.pools, "pools");
  if (!inv.paths.dev.empty()) require_readable(inv.paths.dev, "dev");
  if (!inv.paths.extra_vocab.empty()) {
    require_readable(inv.paths.extra_vocab, "extra-vocab");
  }
  const fs::path out_dir = prepare_out_dir(inv.paths.out_dir);

  const TrainingInputs in = prepare_training(inv, run, err);
  const TrainResult result = train(in.train_set, in.pools, in.vocab, run.setup);

  save_checkpoint(out_dir / "checkpoint.json", result.model);
  std::ostringstream csv;
  write_trajectory_csv(csv, result.trajectory);
  write_text(out_dir / "trajectory.csv", csv.str());

  nlohmann::json manifest = manifest_base(inv, run);
  manifest["outputs"] = {
      {"checkpoint", (out_dir / "checkpoint.json").string()},
      {"trajectory", (out_dir / "trajectory.csv").string()}};
  manifest["summary"] = {{"instances", in.train_set.size()},
                         {"vocab_size", in.vocab.size()},
                         {"steps", result.trajectory.size()}};
  if (!inv.paths.dev.empty()) {
    const auto dev = read_dataset(inv.paths.dev, run, err).instances;
    const auto items = infer_all(dev, result.model, run);
    const auto report = evaluate(items);
    manifest["dev_metrics"] = aggregates_to_json(report.aggregates);
    write_report_table(out, report.aggregates);
  }
  write_manifest(out_dir, manifest, run);

  out << fmt::format("train: instances={} steps={} final_scale={:.9f}\n",
                     in.train_set.size(), result.trajectory.size(),
                     result.trajectory.empty()
                         ? 0.0
                         : result.trajectory.back().reward_scale);
  return kExitOk;
}

int cmd_eval(const Invocation& inv, const RunConfig& run, std::ostream& out,
             std::ostream& err) {
  require_readable(inv.paths.data, "data");
  if (inv.paths.predictions.empty()) {
    require_readable(inv.paths.checkpoint, "checkpoint");
  } else {
    require_readable(inv.paths.predictions, "predictions");
  }
  std::optional<fs::path> out_dir;
  if (!inv.paths.out_dir.empty()) out_dir = prepare_out_dir(inv.paths.out_dir);

  const auto test = read_dataset(inv.paths.data, run, err).instances;
  std::vector<EvalItem> items;
  if (!inv.paths.predictions.empty()) {
    items = read_predictions(inv.paths.predictions, test);
  } else {
    const PolicyModel model = load_checkpoint(inv.paths.checkpoint);
    items = infer_all(test, model, run);
  }
  const EvalReport report = evaluate(items);
  write_report_table(out, report.aggregates);

  if (out_dir) {
    write_text(*out_dir / "eval_report.json",
               aggregates_to_json(report.aggregates).dump(2) + "\n");
    if (inv.paths.predictions.empty()) {
      write_text(*out_dir / "predictions.jsonl", predictions_jsonl(items));
    }
    nlohmann::json manifest = manifest_base(inv, run);
    manifest["outputs"] = {
        {"report", (*out_dir / "eval_report.json").string()}};
    manifest["metrics"] = aggregates_to_json(report.aggregates);
    write_manifest(*out_dir, manifest, run);
  }
  return kExitOk;
}

int cmd_infer(const Invocation& inv, const RunConfig& run, std::ostream& out,
              std::ostream& err) {
  require_readable(inv.paths.data, "data");
  require_readable(inv.paths.checkpoint, "checkpoint");
  std::optional<fs::path> out_dir;
  if (!inv.paths.out_dir.empty()) out_dir = prepare_out_dir(inv.paths.out_dir);

  const auto instances = read_dataset(inv.paths.data, run, err).instances;
  const PolicyModel model = load_checkpoint(inv.paths.checkpoint);
  const auto items = infer_all(instances, model, run);
  const std::string jsonl = predictions_jsonl(items);
  if (out_dir) {
    write_text(*out_dir / "predictions.jsonl", jsonl);
    nlohmann::json manifest = manifest_base(inv, run);
    manifest["outputs"] = {
        {"predictions", (*out_dir / "predictions.jsonl").string()}};
    write_manifest(*out_dir, manifest, run);
    out << fmt::format("infer: instances={}\n", items.size());
  } else {
    out << jsonl;
  }
  return kExitOk;
}

int cmd_ablate(const Invocation& inv, const RunConfig& run, std::ostream& out,
               std::ostream& err) {
  require_readable(inv.paths.data, "data");
  if (!inv.paths.pools.empty()) require_readable(inv.paths.pools, "pools");
  if (!inv.paths.test.empty()) require_readable(inv.paths.test, "test");
  if (!inv.paths.extra_vocab.empty()) {
    require_readable(inv.paths.extra_vocab, "extra-vocab");
  }
  const fs::path out_dir = prepare_out_dir(inv.paths.out_dir);

  const TrainingInputs in = prepare_training(inv, run, err);
  const std::vector<ClozeInstance> test =
      inv.paths.test.empty() ? in.train_set
                             : read_dataset(inv.paths.test, run, err).instances;
  save_pools(out_dir / "pools.jsonl", in.pools);

  const auto conditions = default_ablation_conditions();
  const auto rows =
      run_ablation(in.train_set, in.pools, in.vocab, test, run.setup,
                   conditions, run.seed, run.ablation_seeds, run.inference);

  std::ostringstream table;
  write_ablation_table(table, rows);
  write_text(out_dir / "ablation.txt", table.str());
  out << table.str();

  nlohmann::json json_rows = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& a : row.per_seed) per_seed.push_back(aggregates_to_json(a));
    json_rows.push_back({{"condition", row.condition},
                         {"mean", aggregates_to_json(row.mean)},
                         {"per_seed", per_seed}});
  }
  write_text(out_dir / "ablation.json", json_rows.dump(2) + "\n");

  nlohmann::json manifest = manifest_base(inv, run);
  manifest["outputs"] = {{"table", (out_dir / "ablation.txt").string()},
                         {"json", (out_dir / "ablation.json").string()},
                         {"pools", (out_dir / "pools.jsonl").string()}};
  write_manifest(out_dir, manifest, run);
  return kExitOk;
}

void add_shared_options(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.paths.config, "key=value config file");
  sub->add_option("--out-dir", inv.paths.out_dir, "output directory");

  // Flag name -> config key.
  static const std::vector<std::pair<std::string, std::string>> kKeyed = {
      {"--seed", "seed"},
      {"--epochs", "epochs"},
      {"--batch-size", "batch_size"},
      {"--lr", "lr"},
      {"--weight-decay", "weight_decay"},
      {"--base-scale", "base_scale"},
      {"--max-scale", "max_scale"},
      {"--alpha", "alpha"},
      {"--threshold", "threshold"},
      {"--scale-mode", "scale_mode"},
      {"--constant-scale", "constant_scale"},
      {"--reward-mode", "reward_mode"},
      {"--gen-coefficient", "gen_coefficient"},
      {"--n-generated", "n_generated"},
      {"--n-gold", "n_gold"},
      {"--loss-window", "loss_window"},
      {"--max-generation-rounds", "max_generation_rounds"},
      {"--feature-dim", "feature_dim"},
      {"--init", "init"},
      {"--recompute-confidences", "recompute_confidences"},
      {"--pool-generator", "pool_generator"},
      {"--infer-generator", "infer_generator"},
      {"--k-out", "k_out"},
      {"--k-gen", "k_gen"},
      {"--parse-mode", "parse_mode"},
      {"--seeds", "ablation_seeds"},
  };
  for (const auto& [flag, key] : kKeyed) {
    sub->add_option_function<std::string>(
        flag, [&inv, key = key](const std::string& v) { inv.overrides[key] = v; },
        "overrides config key " + key);
  }
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Dual-reward training and evaluation for cloze distractors",
               "dualreward"};
  app.require_subcommand(1);
  Invocation inv;

  auto* gen = app.add_subcommand("gen-data", "build candidate pools");
  add_shared_options(gen, inv);
  gen->add_option("--data", inv.paths.data, "JSONL instances")->required();
  gen->add_option("--extra-vocab", inv.paths.extra_vocab,
                  "extra candidate tokens, one per line");
  gen->add_option("--checkpoint", inv.paths.checkpoint,
                  "policy checkpoint for pool_generator=policy");

  auto* tr = app.add_subcommand("train", "train a policy");
  add_shared_options(tr, inv);
  tr->add_option("--data", inv.paths.data, "JSONL training instances")
      ->required();
  tr->add_option("--pools", inv.paths.pools, "pool file from gen-data");
  tr->add_option("--dev", inv.paths.dev, "JSONL dev instances");
  tr->add_option("--extra-vocab", inv.paths.extra_vocab,
                 "extra candidate tokens, one per line");

  auto* ev = app.add_subcommand("eval", "score a checkpoint or predictions");
  add_shared_options(ev, inv);
  ev->add_option("--data", inv.paths.data, "JSONL test instances")->required();
  auto* ck = ev->add_option("--checkpoint", inv.paths.checkpoint,
                            "policy checkpoint");
  auto* pr = ev->add_option("--predictions", inv.paths.predictions,
                            "JSONL predictions to score directly");
  ck->excludes(pr);

  auto* inf = app.add_subcommand("infer", "rank distractors for instances");
  add_shared_options(inf, inv);
  inf->add_option("--data", inv.paths.data, "JSONL instances")->required();
  inf->add_option("--checkpoint", inv.paths.checkpoint, "policy checkpoint")
      ->required();

  auto* ab = app.add_subcommand("ablate", "run the ablation matrix");
  add_shared_options(ab, inv);
  ab->add_option("--data", inv.paths.data, "JSONL training instances")
      ->required();
  ab->add_option("--pools", inv.paths.pools, "pool file from gen-data");
  ab->add_option("--test", inv.paths.test,
                 "JSONL evaluation instances (defaults to --data)");
  ab->add_option("--extra-vocab", inv.paths.extra_vocab,
                 "extra candidate tokens, one per line");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (auto* sub : app.get_subcommands()) inv.command = sub->get_name();

  try {
    ConfigMap config;
    if (!inv.paths.config.empty()) config = load_config_file(inv.paths.config);
    for (const auto& [key, value] : inv.overrides) config[key] = value;
    const RunConfig run = resolve_config(config);

    if (inv.command == "gen-data") return cmd_gen_data(inv, run, out, err);
    if (inv.command == "train") return cmd_train(inv, run, out, err);
    if (inv.command == "eval") return cmd_eval(inv, run, out, err);
    if (inv.command == "infer") return cmd_infer(inv, run, out, err);
    if (inv.command == "ablate") return cmd_ablate(inv, run, out, err);
    err << "unknown command\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace dualreward::cli
