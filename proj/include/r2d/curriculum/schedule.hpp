#pragma once

#include <cstdint>

#include "json.hpp"

namespace r2d::curriculum {

/// Stage-2 schedule. With w = warmup_fraction·T and m = transition_fraction·T:
///   pi(t)    = 0 for t < w, min(pi_ceiling, (t - w) / m) for t < w + m,
///              pi_ceiling afterwards
///   alpha(t) = (t / w)·alpha_max for t < w, alpha_max afterwards
struct ScheduleConfig {
  std::uint64_t total_steps = 5000;  // T
  double warmup_fraction = 0.05;
  double transition_fraction = 0.60;
  double pi_ceiling = 0.9;
  double alpha_max = 0.7;

  double warmup_steps() const { return warmup_fraction * static_cast<double>(total_steps); }
  double transition_steps() const { return transition_fraction * static_cast<double>(total_steps); }
  /// First step at which early stopping may fire (w + m).
  double sampling_end() const { return warmup_steps() + transition_steps(); }

  /// Throws ConfigError naming the violated bound.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; unknown keys are rejected.
  static ScheduleConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;
};

struct ScheduleState {
  std::uint64_t t = 0;
  double pi = 0.0;
  double alpha = 0.0;
};

double pi_at(std::uint64_t t, const ScheduleConfig& cfg);
double alpha_at(std::uint64_t t, const ScheduleConfig& cfg);
ScheduleState schedule_state(std::uint64_t t, const ScheduleConfig& cfg);

}  // namespace r2d::curriculum
