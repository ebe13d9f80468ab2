#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "infuse/pump/config.hpp"
#include "infuse/pump/device_api.hpp"
#include "infuse/pump/motion.hpp"
#include "infuse/pump/scale.hpp"

namespace infuse::pump {

enum class Phase { Idle, LoggingIn, Authorized, Infusing, Fault };

inline constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::LoggingIn: return "LoggingIn";
    case Phase::Authorized: return "Authorized";
    case Phase::Infusing: return "Infusing";
    case Phase::Fault: return "Fault";
  }
  return "?";
}

enum class PumpEventType {
  LoginOk,
  LoginFailed,
  PollOk,
  PollFailed,
  TokenRejected,
  InfusionStarted,
  Replanned,
  Drop,
  InfusionCompleted,
  ReportFailed,
  Fault,
};

inline constexpr std::string_view to_string(PumpEventType e) noexcept {
  switch (e) {
    case PumpEventType::LoginOk: return "login_ok";
    case PumpEventType::LoginFailed: return "login_failed";
    case PumpEventType::PollOk: return "poll_ok";
    case PumpEventType::PollFailed: return "poll_failed";
    case PumpEventType::TokenRejected: return "token_rejected";
    case PumpEventType::InfusionStarted: return "infusion_started";
    case PumpEventType::Replanned: return "replanned";
    case PumpEventType::Drop: return "drop";
    case PumpEventType::InfusionCompleted: return "infusion_completed";
    case PumpEventType::ReportFailed: return "report_failed";
    case PumpEventType::Fault: return "fault";
  }
  return "?";
}

struct PumpEvent {
  double t_s = 0;
  PumpEventType type{PumpEventType::PollOk};
  std::int64_t steps_emitted = 0;
  double volume_ml = 0;
  double measured_mass_g = 0;  // scale total at the time of the event
  std::string token_suffix;    // last 6 chars of the token held afterwards
  std::string note;
};

struct PumpState {
  Phase phase = Phase::Idle;
  std::optional<std::string> held_token;
  std::optional<InfusionIndex> active_index;
  std::int64_t steps_emitted = 0;
  double volume_delivered_ml = 0;
  std::optional<double> last_poll_at;
};

/// Pump firmware: login, index polling with re-planning, and the step
/// scheduler. Single-threaded; the caller drives it by asking for the next
/// due time and invoking on_poll / on_step at that time.
class Pump {
 public:
  Pump(PumpConfig config, DeviceApi& api, std::uint64_t seed)
      : config_(std::move(config)),
        api_(api),
        vps_(volume_per_step(config_)),
        meter_(vps_, config_.drop_volume_ml, config_.density_g_ml, config_.scale_resolution_g,
               config_.noise.step_volume_sigma_pct, seed),
        jitter_(seed ^ 0x9e3779b97f4a7c15ULL) {
    config_.validate();
    next_poll_ = 0.0;  // boot: log in and fetch an index right away
  }

  std::optional<double> next_poll_time() const {
    if (finished_) return std::nullopt;
    return next_poll_;
  }
  std::optional<double> next_step_time() const {
    if (finished_ || state_.phase != Phase::Infusing) return std::nullopt;
    return next_step_;
  }
  bool finished() const noexcept { return finished_; }
  bool faulted() const noexcept { return faulted_; }

  void on_poll(double t) {
    ++polls_attempted_;
    auto got = fetch_index(t);
    if (!got) {
      emit(t, PumpEventType::PollFailed, std::string(to_string(got.code())));
      register_failure(t);
      return;
    }
    consecutive_failures_ = 0;
    ++polls_succeeded_;
    state_.last_poll_at = t;
    emit(t, PumpEventType::PollOk, "v" + std::to_string(got->version()));
    if (state_.phase != Phase::Infusing) {
      start_infusion(t, *got);
    } else if (got->version() != state_.active_index->version()) {
      replan(t, *got);
    }
    if (!finished_) next_poll_ = t + config_.polling_interval_s;
  }

  void on_step(double t) {
    ++state_.steps_emitted;
    ++segment_done_;
    state_.volume_delivered_ml = static_cast<double>(state_.steps_emitted) * vps_;
    last_step_at_ = t;
    if (auto drop = meter_.on_step(t - infusion_start_)) {
      emit(t, PumpEventType::Drop, {});
    }
    if (state_.steps_emitted >= target_steps_) {
      complete(t);
      return;
    }
    schedule_next_step();
  }

  const PumpState& state() const noexcept { return state_; }
  const std::vector<PumpEvent>& events() const noexcept { return events_; }
  const std::vector<DropEvent>& drops() const noexcept { return meter_.drops(); }
  const PumpConfig& config() const noexcept { return config_; }
  double volume_per_step_ml() const noexcept { return vps_; }
  std::int64_t target_steps() const noexcept { return target_steps_; }
  double step_period_s() const noexcept { return period_; }
  double infusion_start_s() const noexcept { return infusion_start_; }
  std::optional<double> completed_at() const noexcept { return completed_at_; }
  int polls_attempted() const noexcept { return polls_attempted_; }
  int polls_succeeded() const noexcept { return polls_succeeded_; }
  double measured_volume_ml() const noexcept { return meter_.cumulative_mass_g() / config_.density_g_ml; }

 private:
  bool login(double t) {
    state_.phase = state_.phase == Phase::Infusing ? Phase::Infusing : Phase::LoggingIn;
    auto r = api_.login(LoginRequest{config_.credentials.username, config_.credentials.password,
                                     config_.mac});
    if (!r) {
      emit(t, PumpEventType::LoginFailed, std::string(to_string(r.code())));
      return false;
    }
    state_.held_token = r->token;
    if (state_.phase == Phase::LoggingIn) state_.phase = Phase::Authorized;
    emit(t, PumpEventType::LoginOk, {});
    return true;
  }

  /// Runs one token-bearing call. A held token is spent on exactly one
  /// request. A token rejection earns one re-login and one retry.
  template <class Call>
  auto with_token(double t, Call&& call) -> decltype(call(std::string{})) {
    if (!state_.held_token && !login(t)) {
      return make_error(ErrorCode::Unavailable, "login failed");
    }
    auto token = *std::exchange(state_.held_token, std::nullopt);
    auto r = call(token);
    if (r || !is_token_error(r.code())) return r;
    emit(t, PumpEventType::TokenRejected, std::string(to_string(r.code())));
    if (!login(t)) return r;
    token = *std::exchange(state_.held_token, std::nullopt);
    return call(token);
  }

  Result<InfusionIndex> fetch_index(double t) {
    auto r = with_token(t, [&](const std::string& token) {
      return api_.index(IndexRequest{token, config_.patient_id, config_.mac});
    });
    if (!r) return r.error();
    state_.held_token = r->token;
    return r->index;
  }

  void report(double t, DeviceEventKind kind) {
    const std::uint64_t version = state_.active_index ? state_.active_index->version() : 0;
    auto r = with_token(t, [&](const std::string& token) {
      return api_.report(config_.patient_id,
                         DeviceEventRequest{token, config_.mac, kind,
                                            Centi::round(state_.volume_delivered_ml), version});
    });
    if (!r) {
      emit(t, PumpEventType::ReportFailed, std::string(to_string(r.code())));
      return;
    }
    state_.held_token = r->token;
  }

  void register_failure(double t) {
    if (++consecutive_failures_ < config_.max_consecutive_failures) {
      next_poll_ = t + config_.polling_interval_s;
      return;
    }
    state_.phase = Phase::Fault;
    finished_ = true;
    faulted_ = true;
    emit(t, PumpEventType::Fault, std::to_string(consecutive_failures_) + " consecutive failures");
  }

  void start_infusion(double t, const InfusionIndex& idx) {
    state_.active_index = idx;
    infusion_start_ = t;
    target_steps_ = steps_for(idx.volume().value(), vps_);
    period_ = step_period_for(idx.rate().value(), vps_);
    state_.phase = Phase::Infusing;
    emit(t, PumpEventType::InfusionStarted,
         idx.volume().str() + " mL @ " + idx.rate().str() + " mL/h");
    report(t, DeviceEventKind::InfusionStarted);
    begin_segment(t);
    if (target_steps_ <= 0) complete(t);
  }

  /// New prescription mid-infusion: keep what was delivered, re-target the
  /// total, and re-time the remaining steps from now.
  void replan(double t, const InfusionIndex& idx) {
    state_.active_index = idx;
    target_steps_ = steps_for(idx.volume().value(), vps_);
    period_ = step_period_for(idx.rate().value(), vps_);
    emit(t, PumpEventType::Replanned, idx.volume().str() + " mL @ " + idx.rate().str() + " mL/h");
    if (state_.steps_emitted >= target_steps_) {
      complete(t);
      return;
    }
    begin_segment(t);
  }

  void begin_segment(double t) {
    segment_anchor_ = t;
    segment_done_ = 0;
    schedule_next_step();
  }

  void schedule_next_step() {
    const double nominal =
        segment_anchor_ + static_cast<double>(segment_done_ + 1) * period_;
    const double jitter = jitter_.truncated_normal(config_.noise.timer_jitter_pct / 100.0) * period_;
    next_step_ = std::max(nominal + jitter, last_step_at_);
  }

  void complete(double t) {
    if (meter_.finish(t - infusion_start_)) emit(t, PumpEventType::Drop, "final");
    completed_at_ = t;
    state_.phase = Phase::Authorized;
    emit(t, PumpEventType::InfusionCompleted, Centi::round(state_.volume_delivered_ml).str() + " mL");
    report(t, DeviceEventKind::InfusionCompleted);
    finished_ = true;
  }

  void emit(double t, PumpEventType type, std::string note) {
    PumpEvent e;
    e.t_s = t;
    e.type = type;
    e.steps_emitted = state_.steps_emitted;
    e.volume_ml = state_.volume_delivered_ml;
    e.measured_mass_g = meter_.cumulative_mass_g();
    if (state_.held_token && state_.held_token->size() >= 6) {
      e.token_suffix = state_.held_token->substr(state_.held_token->size() - 6);
    }
    e.note = std::move(note);
    events_.push_back(std::move(e));
  }

  PumpConfig config_;
  DeviceApi& api_;
  double vps_;
  DropMeter meter_;
  NoiseSource jitter_;
  PumpState state_;
  std::vector<PumpEvent> events_;

  std::int64_t target_steps_ = 0;
  double period_ = 0;
  double infusion_start_ = 0;
  double segment_anchor_ = 0;
  std::int64_t segment_done_ = 0;
  double last_step_at_ = 0;
  double next_step_ = 0;
  double next_poll_ = 0;
  std::optional<double> completed_at_;
  int consecutive_failures_ = 0;
  int polls_attempted_ = 0;
  int polls_succeeded_ = 0;
  bool finished_ = false;
  bool faulted_ = false;
};

}  // namespace infuse::pump
