#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "infuse/eval/metrics.hpp"
#include "infuse/pump/simulation.hpp"
#include "infuse/server/router.hpp"
#include "infuse/server/service.hpp"

namespace infuse::eval {

/// One reference infusion setting from the bench protocol.
struct AccuracySetting {
  int id = 1;
  double volume_ml = 2.0;
  double rate_ml_h = 4.0;

  double nominal_duration_s() const noexcept { return volume_ml / rate_ml_h * 3600.0; }
};

inline AccuracySetting reference_setting(int id) {
  switch (id) {
    case 1: return {1, 2.0, 4.0};
    case 2: return {2, 5.0, 5.0};
  }
  throw std::invalid_argument("unknown accuracy setting " + std::to_string(id));
}

struct AccuracyRow {
  int setting_id = 0;
  int experiment = 0;  // 1-based
  double delivered_ml = 0;
  double pct_error_volume = 0;
  double avg_rate_ml_h = 0;
  double pct_error_rate = 0;
};

struct SeriesPoint {
  double t_s = 0;
  double volume_ml = 0;
  double rate_ml_h = 0;
};

struct ExperimentRun {
  AccuracyRow row;
  std::vector<SeriesPoint> series;
  std::uint64_t seed = 0;
  double elapsed_s = 0;
};

inline AccuracyRow make_row(const AccuracySetting& s, int experiment, double delivered_ml,
                            double avg_rate_ml_h) {
  return AccuracyRow{s.id,
                     experiment,
                     delivered_ml,
                     percent_error(delivered_ml, s.volume_ml),
                     avg_rate_ml_h,
                     percent_error(avg_rate_ml_h, s.rate_ml_h)};
}

/// Cumulative-volume series from the drop log, with the rate at each drop
/// taken as a central difference over `window_s` (clipped at the ends).
inline std::vector<SeriesPoint> rate_series(const std::vector<pump::DropEvent>& drops,
                                            double density_g_ml, double window_s = 60.0) {
  std::vector<double> ts{0.0}, vs{0.0};
  for (const auto& d : drops) {
    ts.push_back(d.t_s);
    vs.push_back(d.cumulative_mass_g / density_g_ml);
  }
  auto volume_at = [&](double t) {
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    const std::size_t lo = hi - 1;
    const double span = ts[hi] - ts[lo];
    if (span <= 0) return vs[hi];
    return vs[lo] + (vs[hi] - vs[lo]) * (t - ts[lo]) / span;
  };
  const double t_end = ts.back();
  std::vector<SeriesPoint> out;
  out.reserve(drops.size());
  for (const auto& d : drops) {
    const double a = std::max(0.0, d.t_s - window_s / 2);
    const double b = std::min(t_end, d.t_s + window_s / 2);
    const double rate = b > a ? (volume_at(b) - volume_at(a)) / (b - a) * 3600.0 : 0.0;
    out.push_back(SeriesPoint{d.t_s, d.cumulative_mass_g / density_g_ml, rate});
  }
  return out;
}

/// Server fixtures for a single bench patient prescribed `s`.
inline json bench_fixture(const AccuracySetting& s) {
  return json{
      {"accounts",
       json::array({json{{"username", "bench-doc"}, {"password", "bench-doc-pw"}, {"role", "physician"},
                         {"first_name", "Bench"}, {"last_name", "Physician"}, {"institution", "Bench Lab"}},
                    json{{"username", "bench-pump"}, {"password", "bench-pump-pw"}, {"role", "patient"},
                         {"first_name", "Bench"}, {"last_name", "Patient"}, {"institution", "Bench Lab"},
                         {"macs", json::array({"02:00:00:00:00:01"})}, {"patient_id", "BENCH"}}})},
      {"patients",
       json::array({json{{"patient_id", "BENCH"},
                         {"physician", "bench-doc"},
                         {"limits", {{"max_volume_ml", 10.0}, {"min_rate_ml_h", 0.1}, {"max_rate_ml_h", 200.0}}},
                         {"index", {{"volume_ml", s.volume_ml}, {"rate_ml_h", s.rate_ml_h}}}}})}};
}

inline pump::PumpConfig bench_pump_config(const pump::NoiseConfig& noise) {
  pump::PumpConfig c;
  c.credentials = {"bench-pump", "bench-pump-pw"};
  c.mac = *MacAddress::parse("02:00:00:00:00:01");
  c.patient_id = "BENCH";
  c.noise = noise;
  return c;
}

/// Runs the pump against an in-process server on a virtual clock and weighs
/// the output. Delivered volume is the final scale reading over density;
/// average rate is that volume over the time from start to the last drop.
inline ExperimentRun run_single_experiment(const AccuracySetting& s, int experiment,
                                           std::uint64_t seed, const pump::NoiseConfig& noise) {
  VirtualClock clock;
  server::AuthIndexService service(server::parse_fixtures(bench_fixture(s), server::KdfParams::fast()),
                                   server::ServiceConfig{.kdf = server::KdfParams::fast()});
  server::Router router(service, clock);
  auto api = pump::make_local_device_api(router);
  auto cfg = bench_pump_config(noise);
  auto result = pump::run_state_machine(cfg, clock, *api, seed);
  if (result.faulted || !result.completed_at_s || result.drops.empty()) {
    throw std::runtime_error("accuracy experiment " + std::to_string(s.id) + "/" +
                             std::to_string(experiment) + ": pump did not complete");
  }
  const double delivered = result.drops.back().cumulative_mass_g / cfg.density_g_ml;
  const double elapsed = result.drops.back().t_s;
  ExperimentRun run;
  run.seed = seed;
  run.elapsed_s = elapsed;
  run.row = make_row(s, experiment, delivered, delivered / (elapsed / 3600.0));
  run.series = rate_series(result.drops, cfg.density_g_ml);
  return run;
}

inline std::vector<ExperimentRun> run_accuracy_experiment(const AccuracySetting& s,
                                                          const std::vector<std::uint64_t>& seeds,
                                                          const pump::NoiseConfig& noise) {
  std::vector<ExperimentRun> runs;
  int n = 0;
  for (auto seed : seeds) runs.push_back(run_single_experiment(s, ++n, seed, noise));
  return runs;
}

/// Default bench seeds: five repeats per setting.
inline std::vector<std::uint64_t> default_seeds() { return {1, 2, 3, 4, 5}; }

inline double mean_volume_error(const std::vector<ExperimentRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("mean_volume_error: no runs");
  double sum = 0;
  for (const auto& r : runs) sum += r.row.pct_error_volume;
  return sum / static_cast<double>(runs.size());
}

inline double mean_rate_error(const std::vector<ExperimentRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("mean_rate_error: no runs");
  double sum = 0;
  for (const auto& r : runs) sum += r.row.pct_error_rate;
  return sum / static_cast<double>(runs.size());
}

inline double max_rate_error(const std::vector<ExperimentRun>& runs) {
  double m = 0;
  for (const auto& r : runs) m = std::max(m, r.row.pct_error_rate);
  return m;
}

}  // namespace infuse::eval
