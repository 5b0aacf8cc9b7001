#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dualreward {

// Ranking cutoff for every @3 metric.
inline constexpr std::size_t kMetricCutoff = 3;

struct EvalInstanceResult {
  std::string instance_id;
  double p_at_1 = 0.0;
  double r_at_1 = 0.0;
  double f1_at_3 = 0.0;
  double mrr_at_3 = 0.0;
  double ndcg_at_3 = 0.0;
};

// Binary relevance = membership in `gold`. Only the first three predictions
// count. IDCG is truncated at min(3, |gold|).
EvalInstanceResult score_instance(std::span<const std::string> gold,
                                  std::span<const std::string> predictions);

struct EvalItem {
  std::string instance_id;
  std::vector<std::string> gold;
  std::vector<std::string> predictions;
};

struct MetricAggregates {
  // Percentages, i.e. mean * 100.
  double p_at_1 = 0.0;
  double r_at_1 = 0.0;
  double f1_at_3 = 0.0;
  double mrr_at_3 = 0.0;
  double ndcg_at_3 = 0.0;

  std::array<double, 5> values() const {
    return {p_at_1, r_at_1, f1_at_3, mrr_at_3, ndcg_at_3};
  }
};

inline constexpr std::array<std::string_view, 5> kMetricNames = {
    "P@1", "R@1", "F1@3", "MRR@3", "NDCG@3"};

struct EvalReport {
  std::vector<EvalInstanceResult> per_instance;
  MetricAggregates aggregates;
};

// Macro average in input order. Throws Error(kEmptyDataset) when empty.
EvalReport evaluate(std::span<const EvalItem> items);

// Exactly the five aggregate keys.
nlohmann::json aggregates_to_json(const MetricAggregates& agg);

// Aligned text table with a header row; values with two decimals.
void write_report_table(std::ostream& out, const MetricAggregates& agg);

}  // namespace dualreward
