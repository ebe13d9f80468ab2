#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

#include "infuse/protocol/clock.hpp"
#include "infuse/protocol/codec.hpp"

namespace infuse::server {

enum class LogEvent {
  IndexServed,
  IndexChanged,
  ProposalSubmitted,
  ProposalApproved,
  ProposalRejected,
  InfusionStarted,
  InfusionCompleted,
  DeviceReport,
};

inline constexpr std::string_view to_string(LogEvent e) noexcept {
  switch (e) {
    case LogEvent::IndexServed: return "IndexServed";
    case LogEvent::IndexChanged: return "IndexChanged";
    case LogEvent::ProposalSubmitted: return "ProposalSubmitted";
    case LogEvent::ProposalApproved: return "ProposalApproved";
    case LogEvent::ProposalRejected: return "ProposalRejected";
    case LogEvent::InfusionStarted: return "InfusionStarted";
    case LogEvent::InfusionCompleted: return "InfusionCompleted";
    case LogEvent::DeviceReport: return "DeviceReport";
  }
  return "DeviceReport";
}

inline std::optional<LogEvent> log_event_from_string(std::string_view s) noexcept {
  for (auto e : {LogEvent::IndexServed, LogEvent::IndexChanged, LogEvent::ProposalSubmitted,
                 LogEvent::ProposalApproved, LogEvent::ProposalRejected, LogEvent::InfusionStarted,
                 LogEvent::InfusionCompleted, LogEvent::DeviceReport}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

struct LogEntry {
  std::uint64_t seq = 0;
  Millis timestamp{0};
  std::string patient_id;
  LogEvent event{LogEvent::DeviceReport};
  json payload = json::object();

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

inline json to_json(const LogEntry& e) {
  return json{{"seq", e.seq},
              {"timestamp_ms", e.timestamp.count()},
              {"patient_id", e.patient_id},
              {"event", std::string(to_string(e.event))},
              {"payload", e.payload}};
}

inline std::optional<LogEntry> log_entry_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  try {
    LogEntry e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp = Millis{j.at("timestamp_ms").get<std::int64_t>()};
    e.patient_id = j.at("patient_id").get<std::string>();
    auto ev = log_event_from_string(j.at("event").get<std::string>());
    if (!ev) return std::nullopt;
    e.event = *ev;
    e.payload = j.at("payload");
    return e;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

/// Durable home of the log. Implementations only ever append.
class LogStorage {
 public:
  virtual ~LogStorage() = default;
  virtual void append(const LogEntry& e) = 0;
  virtual std::vector<LogEntry> load() = 0;
  virtual void save_snapshot(const json& snapshot) = 0;
  virtual std::optional<json> load_snapshot() = 0;
};

class MemoryStorage final : public LogStorage {
 public:
  void append(const LogEntry& e) override { entries_.push_back(e); }
  std::vector<LogEntry> load() override { return entries_; }
  void save_snapshot(const json& s) override { snapshot_ = s; }
  std::optional<json> load_snapshot() override { return snapshot_; }

 private:
  std::vector<LogEntry> entries_;
  std::optional<json> snapshot_;
};

/// One JSON object per line at `path`; the snapshot sits beside it at
/// `path + ".snapshot"` and is replaced atomically via rename.
class FileStorage final : public LogStorage {
 public:
  explicit FileStorage(std::filesystem::path path, bool sync_writes = false)
      : path_(std::move(path)), sync_(sync_writes) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    file_ = std::fopen(path_.c_str(), "ab");
    if (!file_) throw std::runtime_error("cannot open log file: " + path_.string());
  }
  ~FileStorage() override {
    if (file_) std::fclose(file_);
  }
  FileStorage(const FileStorage&) = delete;
  FileStorage& operator=(const FileStorage&) = delete;

  void append(const LogEntry& e) override {
    const std::string line = to_json(e).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
      throw std::runtime_error("write failed: " + path_.string());
    }
    if (sync_) ::fsync(::fileno(file_));
  }

  std::vector<LogEntry> load() override {
    std::vector<LogEntry> out;
    std::ifstream in(path_);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto e = log_entry_from_json(json::parse(line, nullptr, false));
      if (!e) {
        throw std::runtime_error(path_.string() + ":" + std::to_string(lineno) +
                                 ": corrupt log entry");
      }
      out.push_back(std::move(*e));
    }
    return out;
  }

  void save_snapshot(const json& s) override {
    auto tmp = snapshot_path();
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << s.dump();
      if (!out) throw std::runtime_error("cannot write snapshot: " + tmp.string());
    }
    std::filesystem::rename(tmp, snapshot_path());
  }

  std::optional<json> load_snapshot() override {
    std::ifstream in(snapshot_path());
    if (!in) return std::nullopt;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupt snapshot: " + snapshot_path().string());
    return j;
  }

 private:
  std::filesystem::path snapshot_path() const {
    auto p = path_;
    p += ".snapshot";
    return p;
  }

  std::filesystem::path path_;
  bool sync_;
  std::FILE* file_ = nullptr;
};

/// Totally ordered, append-only infusion history.
class InfusionLog {
 public:
  explicit InfusionLog(std::unique_ptr<LogStorage> storage) : storage_(std::move(storage)) {
    entries_ = storage_->load();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].seq != i + 1) throw std::runtime_error("log seq gap or duplicate on load");
      by_patient_[entries_[i].patient_id].push_back(i);
    }
  }

  LogEntry append(Millis ts, const std::string& patient_id, LogEvent ev, json payload) {
    std::lock_guard lk(mu_);
    LogEntry e{entries_.size() + 1, ts, patient_id, ev, std::move(payload)};
    storage_->append(e);
    by_patient_[patient_id].push_back(entries_.size());
    entries_.push_back(e);
    return e;
  }

  /// Entries for one patient with from <= timestamp <= to, seq ascending.
  std::vector<LogEntry> query(const std::string& patient_id, Millis from, Millis to) const {
    std::lock_guard lk(mu_);
    std::vector<LogEntry> out;
    auto it = by_patient_.find(patient_id);
    if (it == by_patient_.end() || from > to) return out;
    for (std::size_t i : it->second) {
      const auto& e = entries_[i];
      if (e.timestamp >= from && e.timestamp <= to) out.push_back(e);
    }
    return out;
  }

  std::vector<LogEntry> all() const {
    std::lock_guard lk(mu_);
    return entries_;
  }

  std::uint64_t last_seq() const {
    std::lock_guard lk(mu_);
    return entries_.size();
  }

  LogStorage& storage() { return *storage_; }

 private:
  mutable std::mutex mu_;
  std::unique_ptr<LogStorage> storage_;
  std::vector<LogEntry> entries_;
  std::map<std::string, std::vector<std::size_t>> by_patient_;
};

/// Index state a patient ends up in after a sequence of log entries.
struct ReplayedIndex {
  InfusionIndex current;
  std::optional<InfusionIndex> pending;
  friend bool operator==(const ReplayedIndex&, const ReplayedIndex&) = default;
};

/// Folds index-mutating events over `start`. Entries with seq <= after_seq are skipped.
inline std::map<std::string, ReplayedIndex> replay_indices(
    std::map<std::string, ReplayedIndex> start, const std::vector<LogEntry>& entries,
    std::uint64_t after_seq = 0) {
  auto index_of = [](const json& payload, const char* key) -> std::optional<InfusionIndex> {
    if (!payload.contains(key)) return std::nullopt;
    auto r = codec_detail::index_from(payload.at(key));
    if (!r) return std::nullopt;
    return *r;
  };
  for (const auto& e : entries) {
    if (e.seq <= after_seq) continue;
    auto it = start.find(e.patient_id);
    if (it == start.end()) continue;
    switch (e.event) {
      case LogEvent::IndexChanged:
        if (auto idx = index_of(e.payload, "index")) it->second.current = *idx;
        break;
      case LogEvent::ProposalApproved:
        if (auto idx = index_of(e.payload, "index")) it->second.current = *idx;
        it->second.pending.reset();
        break;
      case LogEvent::ProposalSubmitted:
        it->second.pending = index_of(e.payload, "proposal");
        break;
      case LogEvent::ProposalRejected:
        it->second.pending.reset();
        break;
      default:
        break;
    }
  }
  return start;
}

}  // namespace infuse::server
