#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "infuse/protocol/clock.hpp"
#include "infuse/pump/pump.hpp"

namespace infuse::pump {

struct SimulationOptions {
  /// Virtual seconds per wall second. 0 runs unpaced (as fast as possible);
  /// 1 is real time.
  double accelerate = 0;
  /// Hard stop in virtual seconds, for runs that never complete.
  double max_time_s = 7 * 24 * 3600.0;
  /// Virtual-clock reading at t = 0.
  Millis clock_origin{0};
};

/// Discrete-event driver for one pump. Pump polls, pump steps, and scripted
/// actions are processed in time order; at equal times scripts run first,
/// then polls, then steps. The shared VirtualClock tracks simulated time so
/// an in-process server sees the same timeline.
class Simulation {
 public:
  Simulation(Pump& pump, VirtualClock& clock, SimulationOptions options = {})
      : pump_(pump), clock_(clock), options_(options) {}

  /// Schedules `action` at virtual time t (seconds from start).
  void at(double t, std::function<void()> action) {
    scripts_.push_back({t, std::move(action)});
    std::stable_sort(scripts_.begin(), scripts_.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
  }

  /// Runs until the pump finishes (completes or faults) or max_time_s passes.
  void run() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto wall_start = std::chrono::steady_clock::now();
    while (!pump_.finished()) {
      const double t_script = next_script_ < scripts_.size() ? scripts_[next_script_].t : inf;
      const double t_poll = pump_.next_poll_time().value_or(inf);
      const double t_step = pump_.next_step_time().value_or(inf);
      const double t = std::min({t_script, t_poll, t_step});
      if (t == inf || t > options_.max_time_s) break;

      pace(wall_start, t);
      clock_.set(options_.clock_origin + Millis{static_cast<std::int64_t>(std::floor(t * 1000.0))});
      now_ = t;
      if (t_script == t) {
        scripts_[next_script_++].action();
      } else if (t_poll == t) {
        pump_.on_poll(t);
      } else {
        pump_.on_step(t);
      }
    }
  }

  double now() const noexcept { return now_; }

 private:
  struct Scripted {
    double t;
    std::function<void()> action;
  };

  void pace(std::chrono::steady_clock::time_point wall_start, double t) const {
    if (options_.accelerate <= 0) return;
    const auto target = wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                         std::chrono::duration<double>(t / options_.accelerate));
    std::this_thread::sleep_until(target);
  }

  Pump& pump_;
  VirtualClock& clock_;
  SimulationOptions options_;
  std::vector<Scripted> scripts_;
  std::size_t next_script_ = 0;
  double now_ = 0;
};

/// Event CSV: t_s,event_type,steps_emitted,volume_ml,measured_mass_g,token_suffix,note
inline std::string events_csv(const std::vector<PumpEvent>& events) {
  std::string out = "t_s,event_type,steps_emitted,volume_ml,measured_mass_g,token_suffix,note\n";
  char buf[256];
  for (const auto& e : events) {
    std::string note = e.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::snprintf(buf, sizeof buf, "%.3f,%s,%lld,%.6f,%.2f,", e.t_s,
                  std::string(to_string(e.type)).c_str(), static_cast<long long>(e.steps_emitted),
                  e.volume_ml, e.measured_mass_g);
    out += buf;
    out += e.token_suffix;
    out += ',';
    out += note;
    out += '\n';
  }
  return out;
}

/// Drop log CSV: t_s,measured_mass_g,cumulative_mass_g,steps
inline std::string drops_csv(const std::vector<DropEvent>& drops) {
  std::string out = "t_s,measured_mass_g,cumulative_mass_g,steps\n";
  char buf[128];
  for (const auto& d : drops) {
    std::snprintf(buf, sizeof buf, "%.6f,%.2f,%.2f,%lld\n", d.t_s, d.measured_mass_g,
                  d.cumulative_mass_g, static_cast<long long>(d.steps));
    out += buf;
  }
  return out;
}

}  // namespace infuse::pump

namespace infuse::pump {

struct RunResult {
  std::vector<PumpEvent> events;
  std::vector<DropEvent> drops;
  PumpState final_state;
  bool faulted = false;
  double infusion_start_s = 0;
  std::optional<double> completed_at_s;
  double measured_volume_ml = 0;
};

/// Boots a pump against `api` and runs it to completion or fault.
inline RunResult run_state_machine(const PumpConfig& config, VirtualClock& clock, DeviceApi& api,
                                   std::uint64_t seed, SimulationOptions options = {}) {
  Pump pump(config, api, seed);
  Simulation sim(pump, clock, options);
  sim.run();
  return RunResult{pump.events(), pump.drops(), pump.state(), pump.faulted(),
                   pump.infusion_start_s(), pump.completed_at(), pump.measured_volume_ml()};
}

}  // namespace infuse::pump
