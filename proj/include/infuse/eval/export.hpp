#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "infuse/eval/accuracy.hpp"
#include "infuse/eval/metrics.hpp"
#include "infuse/protocol/codec.hpp"

namespace infuse::eval {

struct MetricsRow {
  int users = 0;
  MetricsSummary summary;
};

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "users,total,avg_ms,max_ms,min_ms,throughput,elapsed_s\n";
  char buf[256];
  for (const auto& r : rows) {
    const auto& m = r.summary;
    std::snprintf(buf, sizeof buf, "%d,%zu,%.3f,%.3f,%.3f,%.3f,%.3f\n", r.users, m.total_requests,
                  m.avg_rt_ms, m.max_rt_ms, m.min_rt_ms, m.throughput, m.elapsed_s);
    out += buf;
  }
  return out;
}

inline std::string accuracy_csv(const std::vector<AccuracyRow>& rows) {
  std::string out = "setting,experiment,delivered_ml,err_vol_pct,avg_rate_ml_h,err_rate_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.2f,%.6f,%.2f\n", r.setting_id, r.experiment,
                  r.delivered_ml, r.pct_error_volume, r.avg_rate_ml_h, r.pct_error_rate);
    out += buf;
  }
  return out;
}

inline std::string series_csv(const std::vector<SeriesPoint>& series) {
  std::string out = "t_s,volume_ml,rate_ml_h\n";
  char buf[128];
  for (const auto& p : series) {
    std::snprintf(buf, sizeof buf, "%.3f,%.4f,%.4f\n", p.t_s, p.volume_ml, p.rate_ml_h);
    out += buf;
  }
  return out;
}

/// Long-format series for plotting tools: one record per point, tagged with
/// setting and experiment.
inline std::string series_json(const std::vector<ExperimentRun>& runs) {
  json values = json::array();
  for (const auto& run : runs) {
    for (const auto& p : run.series) {
      values.push_back(json{{"setting", run.row.setting_id},
                            {"experiment", run.row.experiment},
                            {"t_s", round_to(p.t_s, 3)},
                            {"volume_ml", round_to(p.volume_ml, 4)},
                            {"rate_ml_h", round_to(p.rate_ml_h, 4)}});
    }
  }
  return json{{"values", std::move(values)}}.dump(1);
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void export_metrics(const std::filesystem::path& dir, const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("export_metrics: no rows");
  write_file(dir / "metrics.csv", metrics_csv(rows));
}

/// accuracy.csv for all runs, series_s<setting>_e<n>.csv per run, and series.json.
inline void export_accuracy(const std::filesystem::path& dir, const std::vector<ExperimentRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("export_accuracy: no runs");
  std::vector<AccuracyRow> rows;
  for (const auto& r : runs) {
    rows.push_back(r.row);
    write_file(dir / ("series_s" + std::to_string(r.row.setting_id) + "_e" +
                      std::to_string(r.row.experiment) + ".csv"),
               series_csv(r.series));
  }
  write_file(dir / "accuracy.csv", accuracy_csv(rows));
  write_file(dir / "series.json", series_json(runs));
}

/// Recomputes both error columns of accuracy.csv from its raw columns.
/// Returns the largest absolute disagreement found.
inline double max_csv_error_disagreement(const std::string& csv,
                                         const std::vector<AccuracySetting>& settings) {
  double worst = 0;
  std::size_t pos = csv.find('\n');
  while (pos != std::string::npos && pos + 1 < csv.size()) {
    const std::size_t next = csv.find('\n', pos + 1);
    const std::string line = csv.substr(pos + 1, next - pos - 1);
    pos = next;
    if (line.empty()) continue;
    int setting = 0, experiment = 0;
    double delivered = 0, ev = 0, rate = 0, er = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf", &setting, &experiment, &delivered, &ev,
                    &rate, &er) != 6) {
      throw std::runtime_error("unparseable accuracy row: " + line);
    }
    const AccuracySetting* s = nullptr;
    for (const auto& c : settings) {
      if (c.id == setting) s = &c;
    }
    if (!s) throw std::runtime_error("accuracy row for unknown setting: " + line);
    worst = std::max(worst, std::fabs(percent_error(delivered, s->volume_ml) - ev));
    worst = std::max(worst, std::fabs(percent_error(rate, s->rate_ml_h) - er));
  }
  return worst;
}

}  // namespace infuse::eval
