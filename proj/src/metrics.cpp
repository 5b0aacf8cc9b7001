#include "dualreward/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

double discount(std::size_t rank) {  // rank is 1-based
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

}  // namespace

EvalInstanceResult score_instance(std::span<const std::string> gold,
                                  std::span<const std::string> predictions) {
  if (gold.empty()) throw Error(ErrorCode::kEmptyGold, "gold set is empty");
  if (predictions.empty()) {
    throw Error(ErrorCode::kEmptyPredictions, "no predictions");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p).second) {
      throw Error(ErrorCode::kDuplicatePredictions,
                  "prediction '" + p + "' repeated");
    }
  }
  const std::unordered_set<std::string_view> gold_set(gold.begin(), gold.end());
  const double n_gold = static_cast<double>(gold_set.size());

  const std::size_t top = std::min(kMetricCutoff, predictions.size());
  std::size_t hits = 0;
  std::size_t first_hit = 0;  // 1-based, 0 = none
  double dcg = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    if (gold_set.count(predictions[i]) == 0) continue;
    ++hits;
    if (first_hit == 0) first_hit = i + 1;
    dcg += discount(i + 1);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(kMetricCutoff, gold_set.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += discount(i + 1);

  EvalInstanceResult r;
  r.p_at_1 = first_hit == 1 ? 1.0 : 0.0;
  r.r_at_1 = r.p_at_1 / n_gold;
  if (hits > 0) {
    const double p3 = static_cast<double>(hits) / kMetricCutoff;
    const double r3 = static_cast<double>(hits) / n_gold;
    r.f1_at_3 = 2.0 * p3 * r3 / (p3 + r3);
  }
  r.mrr_at_3 = first_hit == 0 ? 0.0 : 1.0 / static_cast<double>(first_hit);
  r.ndcg_at_3 = dcg / idcg;
  return r;
}

EvalReport evaluate(std::span<const EvalItem> items) {
  if (items.empty()) throw Error(ErrorCode::kEmptyDataset, "nothing to score");
  EvalReport report;
  report.per_instance.reserve(items.size());
  MetricAggregates sum;
  for (const auto& item : items) {
    EvalInstanceResult r = score_instance(item.gold, item.predictions);
    r.instance_id = item.instance_id;
    sum.p_at_1 += r.p_at_1;
    sum.r_at_1 += r.r_at_1;
    sum.f1_at_3 += r.f1_at_3;
    sum.mrr_at_3 += r.mrr_at_3;
    sum.ndcg_at_3 += r.ndcg_at_3;
    report.per_instance.push_back(std::move(r));
  }
  const double n = static_cast<double>(items.size());
  report.aggregates = {100.0 * sum.p_at_1 / n, 100.0 * sum.r_at_1 / n,
                       100.0 * sum.f1_at_3 / n, 100.0 * sum.mrr_at_3 / n,
                       100.0 * sum.ndcg_at_3 / n};
  return report;
}

nlohmann::json aggregates_to_json(const MetricAggregates& agg) {
  nlohmann::json out = nlohmann::json::object();
  const auto values = agg.values();
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    out[std::string(kMetricNames[i])] = values[i];
  }
  return out;
}

void write_report_table(std::ostream& out, const MetricAggregates& agg) {
  for (auto name : kMetricNames) out << fmt::format("{:>8}", name);
  out << '\n';
  for (double v : agg.values()) out << fmt::format("{:>8.2f}", v);
  out << '\n';
}

}  // namespace dualreward
