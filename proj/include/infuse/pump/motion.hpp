#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "infuse/protocol/error.hpp"
#include "infuse/protocol/messages.hpp"
#include "infuse/pump/config.hpp"

namespace infuse::pump {

/// Step timer resolution. Step periods are rounded to this tick.
inline constexpr double kTimerTickS = 1e-6;

/// Volume pushed by one full step: bore area times plunger travel, in mL.
inline double volume_per_step(double inner_diameter_mm, double travel_per_step_mm) noexcept {
  const double radius = inner_diameter_mm / 2.0;
  return std::numbers::pi * radius * radius * travel_per_step_mm / 1000.0;  // mm^3 -> mL
}

inline double volume_per_step(const PumpConfig& c) noexcept {
  return volume_per_step(c.syringe_inner_diameter_mm, c.travel_per_step_mm);
}

struct InfusionPlan {
  std::int64_t total_steps = 0;
  double step_period_s = 0;

  double duration_s() const noexcept { return static_cast<double>(total_steps) * step_period_s; }
};

/// Seconds between steps to hold `rate_ml_h`, rounded to the timer tick.
inline double step_period_for(double rate_ml_h, double vps_ml) noexcept {
  const double period = vps_ml / (rate_ml_h / 3600.0);
  return std::max(kTimerTickS, std::round(period / kTimerTickS) * kTimerTickS);
}

inline std::int64_t steps_for(double volume_ml, double vps_ml) noexcept {
  return static_cast<std::int64_t>(std::llround(volume_ml / vps_ml));
}

inline Result<InfusionPlan> plan_infusion(double volume_ml, double rate_ml_h, double vps_ml) {
  if (!(rate_ml_h >= kMinRate.value() && rate_ml_h <= kMaxRate.value())) {
    return make_error(ErrorCode::LimitViolation, "rate outside 0.10-200.00 mL/h");
  }
  if (!(volume_ml > 0)) return make_error(ErrorCode::LimitViolation, "volume must be positive");
  if (!(vps_ml > 0)) return make_error(ErrorCode::Malformed, "volume per step must be positive");
  return InfusionPlan{steps_for(volume_ml, vps_ml), step_period_for(rate_ml_h, vps_ml)};
}

inline Result<InfusionPlan> plan_infusion(const InfusionIndex& index, const PumpConfig& c) {
  return plan_infusion(index.volume().value(), index.rate().value(), volume_per_step(c));
}

}  // namespace infuse::pump
