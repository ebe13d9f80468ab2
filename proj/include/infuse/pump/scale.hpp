#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace infuse::pump {

/// Seeded source of truncated-normal draws. Box-Muller over mt19937_64 so the
/// sequence depends only on the seed, not on the standard library's
/// distribution implementations.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double standard_normal() {
    if (spare_) {
      double s = *spare_;
      spare_.reset();
      return s;
    }
    double u1 = 0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    return mag * std::cos(2.0 * M_PI * u2);
  }

  /// N(0, sigma) conditioned on |x| <= 3 sigma. Zero sigma draws nothing.
  double truncated_normal(double sigma) {
    if (sigma <= 0) return 0.0;
    for (;;) {
      const double z = standard_normal();
      if (std::fabs(z) <= 3.0) return z * sigma;
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct DropEvent {
  double t_s = 0;              // since infusion start
  double measured_mass_g = 0;  // difference of successive scale readings
  double cumulative_mass_g = 0;
  std::int64_t steps = 0;      // motor steps that formed this drop
  double true_volume_ml = 0;   // steps * volume_per_step
};

/// Bench scale under the outlet. Steps accumulate until a drop's worth of
/// liquid has left the syringe; each drop lands on the scale with a noisy
/// mass, and the scale reports the running total rounded to its resolution.
class DropMeter {
 public:
  DropMeter(double vps_ml, double drop_volume_ml, double density_g_ml, double resolution_g,
            double sigma_pct, std::uint64_t seed)
      : vps_(vps_ml),
        drop_volume_(drop_volume_ml),
        density_(density_g_ml),
        resolution_(resolution_g),
        sigma_(sigma_pct / 100.0),
        noise_(seed) {}

  /// Registers one motor step at time t; returns a drop if one fell.
  std::optional<DropEvent> on_step(double t_s) {
    ++total_steps_;
    ++pending_steps_;
    const double released = static_cast<double>(total_steps_) * vps_;
    if (released + 1e-12 < static_cast<double>(drops_ + 1) * drop_volume_) return std::nullopt;
    return emit(t_s);
  }

  /// Flushes a trailing partial drop at the end of an infusion.
  std::optional<DropEvent> finish(double t_s) {
    if (pending_steps_ == 0) return std::nullopt;
    return emit(t_s);
  }

  std::int64_t total_steps() const noexcept { return total_steps_; }
  double cumulative_mass_g() const noexcept {
    return static_cast<double>(reading_units_) * resolution_;
  }
  const std::vector<DropEvent>& drops() const noexcept { return drops_log_; }

 private:
  DropEvent emit(double t_s) {
    const double true_ml = static_cast<double>(pending_steps_) * vps_;
    const double eps = noise_.truncated_normal(sigma_);
    landed_mass_ += true_ml * density_ * (1.0 + eps);
    const std::int64_t units = std::llround(landed_mass_ / resolution_);
    DropEvent d;
    d.t_s = t_s;
    d.measured_mass_g = static_cast<double>(units - reading_units_) * resolution_;
    d.cumulative_mass_g = static_cast<double>(units) * resolution_;
    d.steps = pending_steps_;
    d.true_volume_ml = true_ml;
    reading_units_ = units;
    pending_steps_ = 0;
    ++drops_;
    drops_log_.push_back(d);
    return d;
  }

  double vps_;
  double drop_volume_;
  double density_;
  double resolution_;
  double sigma_;
  NoiseSource noise_;
  std::int64_t total_steps_ = 0;
  std::int64_t pending_steps_ = 0;
  std::int64_t drops_ = 0;
  double landed_mass_ = 0;
  std::int64_t reading_units_ = 0;
  std::vector<DropEvent> drops_log_;
};

}  // namespace infuse::pump
