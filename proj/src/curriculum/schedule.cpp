#include "r2d/curriculum/schedule.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "r2d/errors.hpp"

namespace r2d::curriculum {

void ScheduleConfig::validate() const {
  if (total_steps == 0) throw ConfigError("schedule: total_steps must be positive");
  if (!(warmup_fraction > 0.0)) throw ConfigError("schedule: warmup_fraction must be > 0");
  if (!(transition_fraction > 0.0)) throw ConfigError("schedule: transition_fraction must be > 0");
  if (!(warmup_fraction + transition_fraction <= 1.0)) {
    throw ConfigError("schedule: warmup_fraction + transition_fraction must be <= 1");
  }
  if (!(pi_ceiling >= 0.0 && pi_ceiling <= 1.0)) throw ConfigError("schedule: pi_ceiling must be in [0, 1]");
  if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw ConfigError("schedule: alpha_max must be in [0, 1]");
}

nlohmann::json ScheduleConfig::to_json() const {
  return {{"total_steps", total_steps},
          {"warmup_fraction", warmup_fraction},
          {"transition_fraction", transition_fraction},
          {"pi_ceiling", pi_ceiling},
          {"alpha_max", alpha_max}};
}

ScheduleConfig ScheduleConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"total_steps", "warmup_fraction", "transition_fraction",
                                           "pi_ceiling", "alpha_max"};
  if (!j.is_object()) throw ConfigError("schedule: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("schedule: unknown key '" + key + "'");
  }
  ScheduleConfig c;
  try {
    c.total_steps = j.value("total_steps", c.total_steps);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.transition_fraction = j.value("transition_fraction", c.transition_fraction);
    c.pi_ceiling = j.value("pi_ceiling", c.pi_ceiling);
    c.alpha_max = j.value("alpha_max", c.alpha_max);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  c.validate();
  return c;
}

double pi_at(std::uint64_t t, const ScheduleConfig& cfg) {
  const double w = cfg.warmup_steps();
  const double m = cfg.transition_steps();
  const double x = static_cast<double>(t);
  if (x < w) return 0.0;
  if (x < w + m) return std::min(cfg.pi_ceiling, (x - w) / m);
  return cfg.pi_ceiling;
}

double alpha_at(std::uint64_t t, const ScheduleConfig& cfg) {
  const double w = cfg.warmup_steps();
  const double x = static_cast<double>(t);
  return x < w ? (x / w) * cfg.alpha_max : cfg.alpha_max;
}

ScheduleState schedule_state(std::uint64_t t, const ScheduleConfig& cfg) {
  return {t, pi_at(t, cfg), alpha_at(t, cfg)};
}

}  // namespace r2d::curriculum
