#pragma once

#include <cstddef>
#include <deque>
#include <optional>

namespace dualreward {

enum class ScaleMode { kAdaptive, kConstant };

struct SchedulerConfig {
  double base_scale = 0.1;
  double max_scale = 0.2;
  double alpha = 5.0;  // steepness of the transition
  double threshold = 1.0;
  ScaleMode mode = ScaleMode::kAdaptive;
  double constant_scale = 0.15;
  std::size_t loss_window = 100;

  // Throws Error(kInvalidConfig).
  void validate() const;
};

// Logistic function, stable for large |x| (no exp overflow).
double sigmoid(double x);

// base + (max - base) * sigmoid(alpha * (avg_loss - threshold)) in adaptive
// mode; constant_scale in constant mode.
double scale_for_loss(double avg_loss, const SchedulerConfig& cfg);

// Sliding window over the most recent per-batch losses.
class SchedulerState {
 public:
  explicit SchedulerState(std::size_t window);

  // Throws Error(kNonFiniteLoss) for NaN, infinite or negative losses.
  void observe(double loss);

  // Exact mean of the window, recomputed in insertion order.
  std::optional<double> avg_loss() const;

  std::size_t size() const { return recent_.size(); }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::deque<double> recent_;
  std::optional<double> avg_;
};

// Config plus window. With no observations yet, the effective average loss is
// the threshold, which puts the adaptive scale at (base + max) / 2.
class RewardScheduler {
 public:
  explicit RewardScheduler(SchedulerConfig cfg);

  double effective_avg_loss() const;
  double current_scale() const;
  void observe(double batch_loss) { state_.observe(batch_loss); }

  const SchedulerConfig& config() const { return cfg_; }
  const SchedulerState& state() const { return state_; }

 private:
  SchedulerConfig cfg_;
  SchedulerState state_;
};

}  // namespace dualreward
