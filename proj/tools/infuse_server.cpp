// infuse-server: login/index API and physician endpoints over HTTP.
//
//   infuse-server [--config FILE] [--fixtures FILE] [--port N] [--snapshot-on-exit]

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include "infuse/server/config.hpp"
#include "infuse/server/http_server.hpp"
#include "infuse/server/router.hpp"
#include "infuse/server/service.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IoMT infusion auth/index server"};
  std::string config_path, fixtures, storage, bind;
  int port = -1;
  bool snapshot_on_exit = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--fixtures", fixtures, "seed fixture file (overrides config)");
  app.add_option("--storage", storage, "log file path or :memory: (overrides config)");
  app.add_option("--bind", bind, "bind address (overrides config)");
  app.add_option("--port", port, "listen port, 0 for any (overrides config)");
  app.add_flag("--snapshot-on-exit", snapshot_on_exit, "write a state snapshot on shutdown");
  CLI11_PARSE(app, argc, argv);

  try {
    using namespace infuse::server;
    auto opts = load_server_options(config_path.empty() ? std::nullopt
                                                        : std::optional<std::string>(config_path));
    if (!fixtures.empty()) opts.fixtures = fixtures;
    if (!storage.empty()) opts.storage = storage;
    if (!bind.empty()) opts.bind = bind;
    if (port >= 0) opts.port = port;
    if (opts.fixtures.empty()) {
      std::cerr << "error: no fixtures file (use --fixtures or INFUSE_FIXTURES)\n";
      return 2;
    }

    const auto cfg = opts.service_config();
    AuthIndexService service(load_fixtures(opts.fixtures, cfg.kdf), cfg, open_storage(opts));
    infuse::SystemClock clock;
    Router router(service, clock);
    HttpServer http(router, opts.workers);
    const int bound = http.start(opts.bind, opts.port);
    std::cout << "listening on " << opts.bind << ":" << bound << " (" << service.patient_ids().size()
              << " patients, kdf=" << opts.kdf << ", storage=" << opts.storage << ")" << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));

    http.stop();
    if (snapshot_on_exit) service.save_snapshot();
    std::cout << "stopped" << std::endl;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
