#include "dualreward/scheduler.hpp"

#include <cmath>
#include <string>

#include "dualreward/error.hpp"

namespace dualreward {
namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void SchedulerConfig::validate() const {
  if (!finite(base_scale) || base_scale <= 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "base_scale must be > 0");
  }
  if (!finite(max_scale) || max_scale <= base_scale) {
    throw Error(ErrorCode::kInvalidConfig, "max_scale must exceed base_scale");
  }
  if (!finite(alpha) || alpha <= 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "alpha must be > 0");
  }
  if (!finite(threshold)) {
    throw Error(ErrorCode::kInvalidConfig, "threshold must be finite");
  }
  if (mode == ScaleMode::kConstant &&
      (!finite(constant_scale) || constant_scale <= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "constant_scale must be > 0");
  }
  if (loss_window < 1) {
    throw Error(ErrorCode::kInvalidConfig, "loss_window must be >= 1");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double scale_for_loss(double avg_loss, const SchedulerConfig& cfg) {
  cfg.validate();
  if (cfg.mode == ScaleMode::kConstant) return cfg.constant_scale;
  if (!finite(avg_loss)) {
    throw Error(ErrorCode::kNonFiniteLoss, "average loss is not finite");
  }
  return cfg.base_scale + (cfg.max_scale - cfg.base_scale) *
                              sigmoid(cfg.alpha * (avg_loss - cfg.threshold));
}

SchedulerState::SchedulerState(std::size_t window) : window_(window) {
  if (window_ < 1) {
    throw Error(ErrorCode::kInvalidConfig, "loss_window must be >= 1");
  }
}

void SchedulerState::observe(double loss) {
  if (!finite(loss) || loss < 0.0) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "batch loss " + std::to_string(loss));
  }
  recent_.push_back(loss);
  if (recent_.size() > window_) recent_.pop_front();
  double sum = 0.0;
  for (double l : recent_) sum += l;
  avg_ = sum / static_cast<double>(recent_.size());
}

std::optional<double> SchedulerState::avg_loss() const { return avg_; }

RewardScheduler::RewardScheduler(SchedulerConfig cfg)
    : cfg_(cfg), state_(cfg.loss_window) {
  cfg_.validate();
}

double RewardScheduler::effective_avg_loss() const {
  return state_.avg_loss().value_or(cfg_.threshold);
}

double RewardScheduler::current_scale() const {
  return scale_for_loss(effective_avg_loss(), cfg_);
}

}  // namespace dualreward
