// bench: server load test and infusion accuracy experiments.
//
//   bench load --users N [N...] --duration S [--server URL] --out DIR
//   bench accuracy --setting {1,2,all} [--seeds FILE] --noise {off,default} --out DIR
//   bench fixture --users N --out FILE
//
// Without --server, `load` starts an in-process HTTP server seeded with the
// generated load fixture. Exit status is 1 on any invariant violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

#include "infuse/eval/accuracy.hpp"
#include "infuse/eval/export.hpp"
#include "infuse/eval/load_test.hpp"
#include "infuse/server/http_server.hpp"
#include "infuse/server/router.hpp"
#include "infuse/server/service.hpp"

namespace {

using namespace infuse;

std::vector<std::uint64_t> read_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open seeds file: " + path);
  std::vector<std::uint64_t> seeds;
  std::uint64_t s = 0;
  while (in >> s) seeds.push_back(s);
  if (!in.eof()) throw std::runtime_error("seeds file must hold whitespace-separated integers: " + path);
  if (seeds.empty()) throw std::runtime_error("seeds file is empty: " + path);
  return seeds;
}

int run_load(std::vector<int> users, double duration, double think, double login_fraction,
             std::string url, const std::string& out) {
  int max_users = 0;
  for (int u : users) max_users = std::max(max_users, u);

  std::unique_ptr<server::AuthIndexService> service;
  std::unique_ptr<server::Router> router;
  std::unique_ptr<server::HttpServer> http;
  SystemClock clock;
  if (url.empty()) {
    server::ServiceConfig sc;
    service = std::make_unique<server::AuthIndexService>(
        server::parse_fixtures(eval::make_load_fixture(max_users), sc.kdf), sc);
    router = std::make_unique<server::Router>(*service, clock);
    // a keep-alive connection holds its worker, so size the pool to the users
    http = std::make_unique<server::HttpServer>(*router, static_cast<std::size_t>(max_users) + 8);
    http->start("127.0.0.1", 0);
    url = http->url();
    std::cout << "in-process server at " << url << "\n";
  }

  const auto vus = eval::virtual_users(max_users);
  std::vector<eval::MetricsRow> rows;
  bool ok = true;
  for (int n : users) {
    eval::LoadProfile p{n, duration, think, login_fraction};
    auto samples = eval::run_load_test(p, url, vus);
    if (samples.empty()) {
      std::cerr << n << " users: no samples\n";
      return 1;
    }
    auto m = eval::compute_metrics(samples);
    std::size_t errors = 0;
    for (const auto& s : samples) errors += !s.ok();
    std::printf("users=%d total=%zu avg_ms=%.2f max_ms=%.2f min_ms=%.2f throughput=%.2f errors=%zu\n",
                n, m.total_requests, m.avg_rt_ms, m.max_rt_ms, m.min_rt_ms, m.throughput, errors);
    if (!(m.min_rt_ms <= m.avg_rt_ms && m.avg_rt_ms <= m.max_rt_ms)) {
      std::cerr << "invariant violated: min <= avg <= max\n";
      ok = false;
    }
    rows.push_back({n, m});
  }
  eval::export_metrics(out, rows);
  return ok ? 0 : 1;
}

int run_accuracy(const std::string& setting, const std::string& seeds_file, const std::string& noise,
                 const std::string& out) {
  std::vector<eval::AccuracySetting> settings;
  if (setting == "1" || setting == "all") settings.push_back(eval::reference_setting(1));
  if (setting == "2" || setting == "all") settings.push_back(eval::reference_setting(2));
  const auto seeds = seeds_file.empty() ? eval::default_seeds() : read_seeds(seeds_file);
  const auto noise_cfg = noise == "off" ? pump::NoiseConfig::off() : pump::NoiseConfig::calibrated();

  bool ok = true;
  std::vector<eval::ExperimentRun> all;
  double max_rate = 0;
  for (const auto& s : settings) {
    auto runs = eval::run_accuracy_experiment(s, seeds, noise_cfg);
    for (const auto& r : runs) {
      std::printf("setting=%d exp=%d delivered_ml=%.2f err_vol=%.2f%% avg_rate=%.3f err_rate=%.2f%%\n",
                  r.row.setting_id, r.row.experiment, r.row.delivered_ml, r.row.pct_error_volume,
                  r.row.avg_rate_ml_h, r.row.pct_error_rate);
      if (noise == "off" && (r.row.pct_error_volume >= 0.1 || r.row.pct_error_rate >= 0.5)) {
        std::cerr << "invariant violated: noise-free run outside 0.1% volume / 0.5% rate\n";
        ok = false;
      }
    }
    const double mean_vol = eval::mean_volume_error(runs);
    max_rate = std::max(max_rate, eval::max_rate_error(runs));
    std::printf("setting=%d mean_err_vol=%.2f%% mean_err_rate=%.2f%%\n", s.id, mean_vol,
                eval::mean_rate_error(runs));
    if (noise != "off" && mean_vol > 3.0) {
      std::cerr << "invariant violated: mean volume error above 3%\n";
      ok = false;
    }
    all.insert(all.end(), runs.begin(), runs.end());
  }
  if (noise != "off" && max_rate > 2.5) {
    std::cerr << "invariant violated: max rate error " << max_rate << "% above 2.5%\n";
    ok = false;
  }
  eval::export_accuracy(out, all);
  std::vector<eval::AccuracyRow> rows;
  for (const auto& r : all) rows.push_back(r.row);
  if (eval::max_csv_error_disagreement(eval::accuracy_csv(rows), settings) > 0.01 + 1e-9) {
    std::cerr << "invariant violated: stored and recomputed errors disagree\n";
    ok = false;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load and accuracy bench"};
  app.require_subcommand(1);

  auto* load = app.add_subcommand("load", "closed-loop HTTP load test");
  std::vector<int> users{20};
  double duration = 60, think = 1.0, login_fraction = 0.1;
  std::string url, out = "bench-out";
  load->add_option("--users", users, "virtual users per group (repeatable)")->check(CLI::PositiveNumber);
  load->add_option("--duration", duration, "seconds per group")->check(CLI::PositiveNumber);
  load->add_option("--think", think, "think time between requests, seconds");
  load->add_option("--login-fraction", login_fraction, "share of requests that are logins");
  load->add_option("--server", url, "server base URL (default: in-process server)");
  load->add_option("--out", out, "output directory");

  auto* acc = app.add_subcommand("accuracy", "infusion accuracy experiments");
  std::string setting = "all", seeds_file, noise = "default", acc_out = "bench-out";
  acc->add_option("--setting", setting, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
  acc->add_option("--seeds", seeds_file, "file of seeds, one experiment each (default 1..5)");
  acc->add_option("--noise", noise, "off or default")->check(CLI::IsMember({"off", "default"}));
  acc->add_option("--out", acc_out, "output directory");

  auto* fix = app.add_subcommand("fixture", "write the load-test seed fixture");
  int fix_users = 100;
  std::string fix_out = "load-fixture.json";
  fix->add_option("--users", fix_users, "number of patient accounts")->check(CLI::PositiveNumber);
  fix->add_option("--out", fix_out, "output file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*load) return run_load(users, duration, think, login_fraction, url, out);
    if (*acc) return run_accuracy(setting, seeds_file, noise, acc_out);
    if (*fix) {
      eval::write_file(fix_out, eval::make_load_fixture(fix_users).dump(2) + "\n");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
