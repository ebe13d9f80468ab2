#pragma once

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "infuse/protocol/clock.hpp"
#include "infuse/protocol/codec.hpp"
#include "infuse/protocol/messages.hpp"
#include "infuse/server/infusion_log.hpp"
#include "infuse/server/password.hpp"
#include "infuse/server/records.hpp"
#include "infuse/server/token_store.hpp"

namespace infuse::server {

struct ServiceConfig {
  Millis login_ttl{60'000};
  Millis index_ttl{300'000};
  Millis session_ttl{30 * 60'000};
  KdfParams kdf = KdfParams::strong();
};

/// Authentication attempt, kept apart from the infusion history.
struct AuditEntry {
  Millis timestamp{0};
  std::string username;
  std::string mac;
  std::string outcome;  // "ok" or an error code name
};

/// Read-through cache of current indices. A value is only admitted if its
/// version is at least the floor set by the latest invalidation, so a reader
/// racing a writer cannot reinstall a superseded index.
class IndexCache {
 public:
  template <class Loader>
  InfusionIndex get(const std::string& patient_id, Loader&& load) {
    {
      std::lock_guard lk(mu_);
      auto it = slots_.find(patient_id);
      if (it != slots_.end() && it->second.value) {
        ++hits_;
        return *it->second.value;
      }
      ++misses_;
    }
    InfusionIndex fresh = load();
    std::lock_guard lk(mu_);
    auto& slot = slots_[patient_id];
    if (fresh.version() >= slot.floor) slot.value = fresh;
    return fresh;
  }

  void invalidate(const std::string& patient_id, std::uint64_t new_version) {
    std::lock_guard lk(mu_);
    auto& slot = slots_[patient_id];
    slot.value.reset();
    slot.floor = new_version;
  }

  std::uint64_t hits() const {
    std::lock_guard lk(mu_);
    return hits_;
  }
  std::uint64_t misses() const {
    std::lock_guard lk(mu_);
    return misses_;
  }

 private:
  struct Slot {
    std::optional<InfusionIndex> value;
    std::uint64_t floor = 0;
  };
  mutable std::mutex mu_;
  std::unordered_map<std::string, Slot> slots_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

/// What the device last told us, for the console's live view.
struct LiveStatus {
  std::string phase = "Idle";
  Centi volume_delivered_ml;
  std::optional<Millis> last_poll;
  std::optional<Millis> last_report;
};

struct PatientStatus {
  std::string patient_id;
  Limits limits;
  InfusionIndex current_index;
  std::optional<InfusionIndex> pending_proposal;
  LiveStatus live;
};

inline json to_json(const PatientStatus& s, Millis now) {
  json live{{"phase", s.live.phase}, {"volume_delivered_ml", s.live.volume_delivered_ml.value()}};
  live["last_poll_age_s"] =
      s.live.last_poll ? json(std::chrono::duration<double>(now - *s.live.last_poll).count())
                       : json(nullptr);
  return json{{"patient_id", s.patient_id},
              {"limits", to_json(s.limits)},
              {"current_index", to_json(s.current_index)},
              {"pending_proposal",
               s.pending_proposal ? to_json(*s.pending_proposal) : json(nullptr)},
              {"live", std::move(live)}};
}

/// Login and index APIs plus the physician operations, transport-free.
/// Every operation takes `now` explicitly; nothing here reads a wall clock.
class AuthIndexService {
 public:
  AuthIndexService(Fixtures fixtures, ServiceConfig config,
                   std::unique_ptr<LogStorage> storage = std::make_unique<MemoryStorage>())
      : config_(config), log_(std::move(storage)) {
    for (auto& a : fixtures.accounts) accounts_.emplace(a.username, std::move(a));
    for (auto& p : fixtures.patients) {
      auto rec = std::make_unique<PatientRecord>();
      rec->profile = std::move(p);
      patients_.emplace(rec->profile.patient_id, std::move(rec));
    }
    dummy_record_ = hash_password("not-a-real-password", config_.kdf);
    restore();
  }

  // Device path --------------------------------------------------------------

  Result<LoginResponse> handle_login(const LoginRequest& req, Millis now) {
    auto result = login_impl(req, now);
    audit(now, req.username, req.mac ? req.mac->str() : "",
          result ? "ok" : std::string(to_string(result.code())));
    return result;
  }

  Result<IndexResponse> handle_index(const IndexRequest& req, Millis now) {
    auto auth = authorize_device(req.token, req.mac, req.patient_id, now);
    if (!auth) return auth.error();
    PatientRecord& rec = *auth->record;

    InfusionIndex idx = cache_.get(req.patient_id, [&] {
      std::lock_guard lk(rec.mu);
      return rec.profile.current_index;
    });
    Token fresh = tokens_.issue(TokenKind::IndexIssued, auth->owner, now, config_.index_ttl);
    {
      std::lock_guard lk(rec.mu);
      rec.live.last_poll = now;
      log_.append(now, req.patient_id, LogEvent::IndexServed, json{{"index", to_json(idx)}});
    }
    return IndexResponse{idx, fresh.value};
  }

  Status consume_token(const std::string& value, Millis now) { return tokens_.consume(value, now); }

  Result<DeviceEventResponse> report_device_event(const std::string& patient_id,
                                                  const DeviceEventRequest& req, Millis now) {
    auto auth = authorize_device(req.token, req.mac, patient_id, now);
    if (!auth) return auth.error();
    PatientRecord& rec = *auth->record;
    Token fresh = tokens_.issue(TokenKind::IndexIssued, auth->owner, now, config_.index_ttl);

    LogEvent ev = LogEvent::DeviceReport;
    std::string phase = "Infusing";
    switch (req.event) {
      case DeviceEventKind::InfusionStarted: ev = LogEvent::InfusionStarted; break;
      case DeviceEventKind::InfusionCompleted: ev = LogEvent::InfusionCompleted; phase = "Completed"; break;
      case DeviceEventKind::DeviceReport: break;
    }
    {
      std::lock_guard lk(rec.mu);
      rec.live.phase = phase;
      rec.live.volume_delivered_ml = req.delivered_ml;
      rec.live.last_report = now;
      log_.append(now, patient_id, ev,
                  json{{"delivered_ml", req.delivered_ml.value()},
                       {"index_version", req.index_version}});
    }
    return DeviceEventResponse{fresh.value};
  }

  // Physician path -----------------------------------------------------------

  Result<SetIndexResponse> set_infusion_index(const std::string& session,
                                              const std::string& patient_id,
                                              const IndexUpdate& update, Millis now) {
    auto rec = authorize_physician(session, patient_id, now);
    if (!rec) return rec.error();
    std::lock_guard lk(rec.value()->mu);
    auto applied = apply_index_locked(*rec.value(), update, LogEvent::IndexChanged, now);
    if (!applied) return applied.error();
    return SetIndexResponse{applied->version()};
  }

  /// Algorithm-facing and unauthenticated. Proposals may exceed the
  /// patient's limits (the physician decides) but never the pump's range.
  Status propose_index(const std::string& patient_id, const IndexUpdate& update, Millis now) {
    auto it = patients_.find(patient_id);
    if (it == patients_.end()) return make_error(ErrorCode::NotFound, "unknown patient");
    auto idx = InfusionIndex::make(update.volume_ml, update.rate_ml_h, 0);
    if (!idx) return idx.error();
    PatientRecord& rec = *it->second;
    std::lock_guard lk(rec.mu);
    rec.profile.pending_proposal = *idx;
    log_.append(now, patient_id, LogEvent::ProposalSubmitted, json{{"proposal", to_json(*idx)}});
    return ok_status();
  }

  /// A rejected approval (limits) keeps the proposal pending.
  Result<ResolveResponse> resolve_proposal(const std::string& session,
                                           const std::string& patient_id, bool approve,
                                           Millis now) {
    auto rec = authorize_physician(session, patient_id, now);
    if (!rec) return rec.error();
    PatientRecord& r = *rec.value();
    std::lock_guard lk(r.mu);
    if (!r.profile.pending_proposal) return make_error(ErrorCode::NotFound, "no pending proposal");
    const InfusionIndex proposal = *r.profile.pending_proposal;
    if (!approve) {
      r.profile.pending_proposal.reset();
      log_.append(now, patient_id, LogEvent::ProposalRejected,
                  json{{"proposal", to_json(proposal)}});
      return ResolveResponse{false, std::nullopt};
    }
    auto applied = apply_index_locked(r, IndexUpdate{proposal.volume(), proposal.rate()},
                                      LogEvent::ProposalApproved, now);
    if (!applied) return applied.error();
    return ResolveResponse{true, applied->version()};
  }

  /// Entries with from <= timestamp <= to, seq ascending.
  Result<std::vector<LogEntry>> get_history(const std::string& session,
                                            const std::string& patient_id, Millis from, Millis to,
                                            Millis now) const {
    auto rec = authorize_physician(session, patient_id, now);
    if (!rec) return rec.error();
    return log_.query(patient_id, from, to);
  }

  Result<PatientStatus> get_status(const std::string& session, const std::string& patient_id,
                                   Millis now) const {
    auto rec = authorize_physician(session, patient_id, now);
    if (!rec) return rec.error();
    const PatientRecord& r = *rec.value();
    std::lock_guard lk(r.mu);
    return PatientStatus{r.profile.patient_id, r.profile.limits, r.profile.current_index,
                         r.profile.pending_proposal, r.live};
  }

  // Introspection ------------------------------------------------------------

  std::optional<InfusionIndex> current_index(const std::string& patient_id) const {
    auto it = patients_.find(patient_id);
    if (it == patients_.end()) return std::nullopt;
    std::lock_guard lk(it->second->mu);
    return it->second->profile.current_index;
  }

  std::optional<PatientProfile> profile(const std::string& patient_id) const {
    auto it = patients_.find(patient_id);
    if (it == patients_.end()) return std::nullopt;
    std::lock_guard lk(it->second->mu);
    return it->second->profile;
  }

  std::vector<std::string> patient_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : patients_) ids.push_back(id);
    return ids;
  }

  std::vector<AuditEntry> audit_trail() const {
    std::lock_guard lk(audit_mu_);
    return {audit_.begin(), audit_.end()};
  }

  const InfusionLog& log() const { return log_; }
  const TokenStore& tokens() const { return tokens_; }
  const IndexCache& cache() const { return cache_; }
  const ServiceConfig& config() const { return config_; }

  /// The state each patient started from before any log entry.
  std::map<std::string, ReplayedIndex> initial_state() const { return initial_; }

  /// Writes current indices and pending proposals as a restart point.
  void save_snapshot() {
    json patients = json::object();
    std::uint64_t seq = 0;
    {
      std::vector<std::unique_lock<std::mutex>> locks;
      for (auto& [id, rec] : patients_) locks.emplace_back(rec->mu);
      seq = log_.last_seq();
      for (auto& [id, rec] : patients_) {
        patients[id] = json{{"current_index", to_json(rec->profile.current_index)},
                            {"pending_proposal", rec->profile.pending_proposal
                                                     ? to_json(*rec->profile.pending_proposal)
                                                     : json(nullptr)}};
      }
    }
    log_.storage().save_snapshot(json{{"seq", seq}, {"patients", std::move(patients)}});
  }

 private:
  struct PatientRecord {
    mutable std::mutex mu;
    PatientProfile profile;
    LiveStatus live;
  };

  Result<LoginResponse> login_impl(const LoginRequest& req, Millis now) {
    auto it = accounts_.find(req.username);
    if (it == accounts_.end()) {
      verify_password(req.password, dummy_record_);  // same cost as a real miss
      return make_error(ErrorCode::BadCredentials, "bad username or password");
    }
    const Account& acc = it->second;
    if (!verify_password(req.password, acc.password_record)) {
      return make_error(ErrorCode::BadCredentials, "bad username or password");
    }
    Token t;
    if (acc.role == Role::Physician) {
      t = tokens_.issue(TokenKind::Session, acc.username, now, config_.session_ttl);
    } else {
      if (!req.mac || !acc.registered_macs.count(*req.mac)) {
        return make_error(ErrorCode::UnknownDevice, "device not registered to this account");
      }
      t = tokens_.issue(TokenKind::LoginIssued, acc.username, now, config_.login_ttl);
    }
    return LoginResponse{acc.first_name, acc.last_name, acc.institution, t.value};
  }

  struct DeviceAuth {
    PatientRecord* record = nullptr;
    std::string owner;
  };

  /// Device checks in order: token known, MAC bound to owner, patient owned;
  /// only then is the token consumed. Failures before consumption mutate nothing.
  Result<DeviceAuth> authorize_device(const std::string& token, const MacAddress& mac,
                                          const std::string& patient_id, Millis now) {
    auto entry = tokens_.peek(token);
    if (!entry || entry->token.kind == TokenKind::Session) {
      return make_error(ErrorCode::TokenUnknown, "token not recognised");
    }
    auto acc = accounts_.find(entry->owner);
    if (acc == accounts_.end()) return make_error(ErrorCode::TokenUnknown, "token owner gone");
    if (!acc->second.registered_macs.count(mac)) {
      return make_error(ErrorCode::UnknownDevice, "device not registered to this account");
    }
    auto rec = patients_.find(patient_id);
    if (rec == patients_.end() || acc->second.patient_id != patient_id) {
      return make_error(ErrorCode::NotFound, "unknown patient");
    }
    if (auto st = tokens_.consume(token, now); !st) return st.error();
    return DeviceAuth{rec->second.get(), entry->owner};
  }

  Result<PatientRecord*> authorize_physician(const std::string& session,
                                             const std::string& patient_id, Millis now) const {
    auto owner = tokens_.check_session(session, now);
    if (!owner) return owner.error();
    auto acc = accounts_.find(*owner);
    if (acc == accounts_.end() || acc->second.role != Role::Physician) {
      return make_error(ErrorCode::BadCredentials, "not a physician session");
    }
    auto rec = patients_.find(patient_id);
    if (rec == patients_.end()) return make_error(ErrorCode::NotFound, "unknown patient");
    if (rec->second->profile.physician_username != *owner) {
      return make_error(ErrorCode::BadCredentials, "not this patient's physician");
    }
    return rec->second.get();
  }

  /// Caller holds rec.mu.
  Result<InfusionIndex> apply_index_locked(PatientRecord& rec, const IndexUpdate& update,
                                           LogEvent ev, Millis now) {
    auto& prof = rec.profile;
    auto idx = InfusionIndex::make(update.volume_ml, update.rate_ml_h,
                                   prof.current_index.version() + 1);
    if (!idx) return idx.error();
    if (!prof.limits.allows(*idx)) {
      return make_error(ErrorCode::LimitViolation, "index outside patient limits");
    }
    prof.current_index = *idx;
    if (ev == LogEvent::ProposalApproved) prof.pending_proposal.reset();
    log_.append(now, prof.patient_id, ev, json{{"index", to_json(*idx)}});
    cache_.invalidate(prof.patient_id, idx->version());
    return *idx;
  }

  void restore() {
    for (auto& [id, rec] : patients_) {
      initial_[id] = ReplayedIndex{rec->profile.current_index, std::nullopt};
    }
    auto state = initial_;
    std::uint64_t after = 0;
    if (auto snap = log_.storage().load_snapshot()) {
      after = snap->value("seq", std::uint64_t{0});
      for (auto& [id, st] : state) {
        if (!snap->contains("patients") || !snap->at("patients").contains(id)) continue;
        const auto& p = snap->at("patients").at(id);
        if (auto idx = codec_detail::index_from(p.at("current_index"))) st.current = *idx;
        if (!p.at("pending_proposal").is_null()) {
          if (auto pp = codec_detail::index_from(p.at("pending_proposal"))) st.pending = *pp;
        }
      }
    }
    state = replay_indices(std::move(state), log_.all(), after);
    for (auto& [id, st] : state) {
      auto& prof = patients_.at(id)->profile;
      prof.current_index = st.current;
      prof.pending_proposal = st.pending;
    }
  }

  void audit(Millis now, const std::string& user, std::string mac, std::string outcome) {
    std::lock_guard lk(audit_mu_);
    if (audit_.size() >= kAuditCapacity) audit_.pop_front();
    audit_.push_back(AuditEntry{now, user, std::move(mac), std::move(outcome)});
  }

  static constexpr std::size_t kAuditCapacity = 100'000;

  ServiceConfig config_;
  std::unordered_map<std::string, Account> accounts_;
  std::map<std::string, std::unique_ptr<PatientRecord>> patients_;
  std::map<std::string, ReplayedIndex> initial_;
  std::string dummy_record_;
  TokenStore tokens_;
  IndexCache cache_;
  InfusionLog log_;
  mutable std::mutex audit_mu_;
  std::deque<AuditEntry> audit_;
};

}  // namespace infuse::server
