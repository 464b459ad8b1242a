#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "glyphnet/errors.hpp"

namespace glyphnet {

// Learning-rate schedule: multi-step decay or linear warmup + cosine decay.
struct LrSchedule {
  std::string kind = "multi_step";  // multi_step | warm_cosine
  double initial_lr = 1e-4;
  int epochs = 1;
  std::vector<int> milestones;  // multi_step
  double gamma = 0.1;           // multi_step decay factor
  int warmup_epochs = 5;        // warm_cosine

  void validate() const {
    require(kind == "multi_step" || kind == "warm_cosine",
            "LrSchedule: kind must be multi_step or warm_cosine");
    require(initial_lr > 0.0, "LrSchedule: initial_lr must be positive");
    require(epochs >= 1, "LrSchedule: epochs must be positive");
    require(gamma > 0.0, "LrSchedule: gamma must be positive");
    require(warmup_epochs >= 0, "LrSchedule: warmup_epochs must be nonnegative");
  }
};

// multi_step: initial_lr * gamma^(#milestones passed).
// warm_cosine: linear ramp 0 -> initial_lr over warmup_epochs, then cosine
// decay reaching 0 at the final epoch.
inline double lr_at(const LrSchedule& schedule, int epoch) {
  schedule.validate();
  require(epoch >= 0 && epoch < schedule.epochs, "lr_at: epoch out of range");
  if (schedule.kind == "multi_step") {
    int passed = 0;
    for (int m : schedule.milestones)
      if (epoch >= m) ++passed;
    return schedule.initial_lr * std::pow(schedule.gamma, passed);
  }
  if (schedule.warmup_epochs > 0 && epoch < schedule.warmup_epochs)
    return schedule.initial_lr * static_cast<double>(epoch) / schedule.warmup_epochs;
  const int last = schedule.epochs - 1;
  if (last <= schedule.warmup_epochs) return schedule.initial_lr;
  const double progress = static_cast<double>(epoch - schedule.warmup_epochs) /
                          (last - schedule.warmup_epochs);
  return schedule.initial_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// Conventional defaults when no milestones are given: 60% and 80% of the run.
inline std::vector<int> default_milestones(int epochs) {
  return {std::max(1, epochs * 6 / 10), std::max(1, epochs * 8 / 10)};
}

}  // namespace glyphnet
