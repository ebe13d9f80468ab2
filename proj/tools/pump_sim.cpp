// pump-sim: wearable syringe pump simulator.
//
//   pump-sim run --config FILE [--seed N] [--accelerate X] [--events-out CSV]
//                [--drops-out CSV] [--local-fixtures FILE]
//
// --accelerate is virtual seconds per wall second (1 = real time, 0 = as fast
// as possible). With --local-fixtures the pump talks to an in-process server
// that shares its virtual clock instead of the configured server_url.

#include <CLI11.hpp>

#include <iostream>
#include <memory>

#include "infuse/eval/export.hpp"
#include "infuse/pump/config.hpp"
#include "infuse/pump/device_api.hpp"
#include "infuse/pump/simulation.hpp"
#include "infuse/server/router.hpp"
#include "infuse/server/service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Syringe infusion pump simulator"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run one infusion to completion");
  std::string config_path, events_out, drops_out, local_fixtures;
  std::uint64_t seed = 1;
  double accelerate = 1.0;
  run->add_option("--config", config_path, "pump config JSON")->required();
  run->add_option("--seed", seed, "noise seed");
  run->add_option("--accelerate", accelerate, "virtual seconds per wall second (0 = unpaced)")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--events-out", events_out, "event CSV output path");
  run->add_option("--drops-out", drops_out, "drop log CSV output path");
  run->add_option("--local-fixtures", local_fixtures, "serve from an in-process server seeded from FILE");
  CLI11_PARSE(app, argc, argv);

  try {
    using namespace infuse;
    auto cfg = pump::load_pump_config(config_path);

    VirtualClock clock;
    std::unique_ptr<server::AuthIndexService> service;
    std::unique_ptr<server::Router> router;
    std::unique_ptr<pump::DeviceApi> api;
    pump::SimulationOptions opts;
    opts.accelerate = accelerate;
    if (!local_fixtures.empty()) {
      server::ServiceConfig sc{.kdf = server::KdfParams::fast()};
      service = std::make_unique<server::AuthIndexService>(
          server::load_fixtures(local_fixtures, sc.kdf), sc);
      router = std::make_unique<server::Router>(*service, clock);
      api = pump::make_local_device_api(*router);
    } else {
      api = std::make_unique<pump::HttpDeviceApi>(cfg.server_url);
    }

    auto result = pump::run_state_machine(cfg, clock, *api, seed, opts);
    if (!events_out.empty()) eval::write_file(events_out, pump::events_csv(result.events));
    if (!drops_out.empty()) eval::write_file(drops_out, pump::drops_csv(result.drops));

    std::cout << "phase=" << pump::to_string(result.final_state.phase)
              << " steps=" << result.final_state.steps_emitted
              << " delivered_ml=" << result.final_state.volume_delivered_ml
              << " measured_ml=" << result.measured_volume_ml
              << " drops=" << result.drops.size() << "\n";
    return result.faulted ? 3 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
