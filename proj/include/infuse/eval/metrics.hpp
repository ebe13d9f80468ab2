#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace infuse::eval {

/// One timed request/response exchange.
struct RequestSample {
  double sent_at_ms = 0;  // relative to the start of the run
  double latency_ms = 0;
  std::string endpoint;
  std::string outcome = "ok";  // "ok" or an error code name

  bool ok() const noexcept { return outcome == "ok"; }
};

struct MetricsSummary {
  std::size_t total_requests = 0;
  double avg_rt_ms = 0;
  double max_rt_ms = 0;
  double min_rt_ms = 0;
  double throughput = 0;  // requests per second
  double elapsed_s = 0;
};

/// Wall span from the first request sent to the last response received.
inline double elapsed_seconds(std::span<const RequestSample> samples) {
  if (samples.empty()) throw std::invalid_argument("elapsed_seconds: no samples");
  double first = samples.front().sent_at_ms;
  double last = samples.front().sent_at_ms + samples.front().latency_ms;
  for (const auto& s : samples) {
    first = std::min(first, s.sent_at_ms);
    last = std::max(last, s.sent_at_ms + s.latency_ms);
  }
  return (last - first) / 1000.0;
}

/// Response-time statistics and throughput = total / elapsed.
inline MetricsSummary compute_metrics(std::span<const RequestSample> samples, double elapsed_s) {
  if (samples.empty()) throw std::invalid_argument("compute_metrics: no samples");
  if (!(elapsed_s > 0)) throw std::invalid_argument("compute_metrics: elapsed must be > 0");
  MetricsSummary m;
  m.total_requests = samples.size();
  m.min_rt_ms = samples.front().latency_ms;
  m.max_rt_ms = samples.front().latency_ms;
  double sum = 0;
  for (const auto& s : samples) {
    sum += s.latency_ms;
    m.min_rt_ms = std::min(m.min_rt_ms, s.latency_ms);
    m.max_rt_ms = std::max(m.max_rt_ms, s.latency_ms);
  }
  m.avg_rt_ms = sum / static_cast<double>(samples.size());
  m.elapsed_s = elapsed_s;
  m.throughput = static_cast<double>(samples.size()) / elapsed_s;
  return m;
}

inline MetricsSummary compute_metrics(std::span<const RequestSample> samples) {
  return compute_metrics(samples, elapsed_seconds(samples));
}

inline double round_to(double v, int decimals) {
  const double f = std::pow(10.0, decimals);
  return std::round(v * f) / f;
}

/// 100 * |measured - desired| / desired, rounded to 2 decimals.
inline double percent_error(double measured, double desired) {
  if (!(desired > 0)) throw std::invalid_argument("percent_error: desired must be > 0");
  return round_to(100.0 * std::fabs(measured - desired) / desired, 2);
}

}  // namespace infuse::eval
