#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "infuse/protocol/error.hpp"
#include "infuse/protocol/messages.hpp"
#include "infuse/protocol/token.hpp"

namespace infuse {

using json = nlohmann::json;

inline constexpr std::string_view to_string(DeviceEventKind k) noexcept {
  switch (k) {
    case DeviceEventKind::InfusionStarted: return "InfusionStarted";
    case DeviceEventKind::InfusionCompleted: return "InfusionCompleted";
    case DeviceEventKind::DeviceReport: return "DeviceReport";
  }
  return "DeviceReport";
}

inline std::optional<DeviceEventKind> device_event_from_string(std::string_view s) noexcept {
  for (auto k : {DeviceEventKind::InfusionStarted, DeviceEventKind::InfusionCompleted,
                 DeviceEventKind::DeviceReport}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace codec_detail {

/// Strict reader over one JSON object: every key must be consumed exactly once.
class ObjectReader {
 public:
  explicit ObjectReader(const json& j) : j_(j) {
    if (!j_.is_object()) fail("body must be a JSON object");
  }

  const json* find(const char* key, bool required) {
    if (!j_.is_object()) return nullptr;
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) fail(std::string("missing field '") + key + "'");
      return nullptr;
    }
    seen_.insert(key);
    return &*it;
  }

  std::string string(const char* key, std::size_t max_len = 4096) {
    const json* v = find(key, true);
    if (!v) return {};
    if (!v->is_string()) return fail(std::string("field '") + key + "' must be a string"), "";
    auto s = v->get<std::string>();
    if (s.empty() || s.size() > max_len) fail(std::string("field '") + key + "' has bad length");
    return s;
  }

  std::string token(const char* key) {
    auto s = string(key);
    if (ok() && !is_token_value(s)) fail(std::string("field '") + key + "' is not a token");
    return s;
  }

  std::optional<MacAddress> mac(const char* key, bool required) {
    const json* v = find(key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) return fail("mac must be a string"), std::nullopt;
    auto m = MacAddress::parse(v->get_ref<const std::string&>());
    if (!m) fail("mac is not canonical AA:BB:CC:DD:EE:FF");
    return m;
  }

  Centi centi(const char* key) {
    const json* v = find(key, true);
    if (!v) return {};
    if (!v->is_number()) return fail(std::string("field '") + key + "' must be a number"), Centi{};
    auto c = Centi::from_double_exact(v->get<double>());
    if (!c) return fail(std::string("field '") + key + "' needs at most 2 decimals"), Centi{};
    return *c;
  }

  std::uint64_t unsigned_int(const char* key) {
    const json* v = find(key, true);
    if (!v) return 0;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      return fail(std::string("field '") + key + "' must be a non-negative integer"), 0;
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const char* key) {
    const json* v = find(key, true);
    if (!v) return false;
    if (!v->is_boolean()) return fail(std::string("field '") + key + "' must be a boolean"), false;
    return v->get<bool>();
  }

  const json* object(const char* key) {
    const json* v = find(key, true);
    if (v && !v->is_object()) fail(std::string("field '") + key + "' must be an object");
    return ok() ? v : nullptr;
  }

  /// Checks for unknown keys; returns the first error, if any.
  std::optional<ApiError> finish() {
    if (ok() && j_.is_object()) {
      for (auto it = j_.begin(); it != j_.end(); ++it) {
        if (!seen_.count(it.key())) {
          fail("unexpected field '" + it.key() + "'");
          break;
        }
      }
    }
    return error_;
  }

  bool ok() const noexcept { return !error_.has_value(); }

  void fail(std::string msg) {
    if (!error_) error_ = make_error(ErrorCode::Malformed, std::move(msg));
  }

 private:
  const json& j_;
  std::set<std::string> seen_;
  std::optional<ApiError> error_;
};

inline Result<json> parse(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) return make_error(ErrorCode::Malformed, "body is not valid JSON");
  return j;
}

template <class T, class F>
Result<T> read(std::string_view bytes, F&& fill) {
  auto j = parse(bytes);
  if (!j) return j.error();
  ObjectReader r(*j);
  T out = fill(r);
  if (auto err = r.finish()) return *err;
  return out;
}

inline Result<InfusionIndex> index_from(const json& j) {
  ObjectReader r(j);
  auto vol = r.centi("volume_ml");
  auto rate = r.centi("rate_ml_h");
  auto ver = r.unsigned_int("version");
  if (auto err = r.finish()) return *err;
  auto idx = InfusionIndex::make(vol, rate, ver);
  if (!idx) return make_error(ErrorCode::Malformed, idx.error().message);
  return idx;
}

}  // namespace codec_detail

// JSON values ---------------------------------------------------------------

inline const json& to_json(const json& j) { return j; }

inline json to_json(const InfusionIndex& idx) {
  return json{{"volume_ml", idx.volume().value()},
              {"rate_ml_h", idx.rate().value()},
              {"version", idx.version()}};
}

inline json to_json(const LoginRequest& m) {
  json j{{"username", m.username}, {"password", m.password}};
  if (m.mac) j["mac"] = m.mac->str();
  return j;
}

inline json to_json(const LoginResponse& m) {
  return json{{"first_name", m.first_name},
              {"last_name", m.last_name},
              {"institution", m.institution},
              {"token", m.token}};
}

inline json to_json(const IndexRequest& m) {
  return json{{"token", m.token}, {"patient_id", m.patient_id}, {"mac", m.mac.str()}};
}

inline json to_json(const IndexResponse& m) {
  return json{{"index", to_json(m.index)}, {"token", m.token}};
}

inline json to_json(const IndexUpdate& m) {
  return json{{"volume_ml", m.volume_ml.value()}, {"rate_ml_h", m.rate_ml_h.value()}};
}

inline json to_json(const SetIndexResponse& m) { return json{{"version", m.version}}; }

inline json to_json(const ResolveRequest& m) { return json{{"approve", m.approve}}; }

inline json to_json(const ResolveResponse& m) {
  json j{{"approved", m.approved}};
  if (m.version) j["version"] = *m.version;
  return j;
}

inline json to_json(const DeviceEventRequest& m) {
  return json{{"token", m.token},
              {"mac", m.mac.str()},
              {"event", std::string(to_string(m.event))},
              {"delivered_ml", m.delivered_ml.value()},
              {"index_version", m.index_version}};
}

inline json to_json(const DeviceEventResponse& m) { return json{{"token", m.token}}; }

inline json to_json(const ApiError& e) {
  return json{{"error", std::string(to_string(e.code))}, {"message", e.message}};
}

template <class Msg>
std::string encode_message(const Msg& m) {
  return to_json(m).dump();
}

// Decoding ------------------------------------------------------------------

template <class Msg>
Result<Msg> decode_message(std::string_view bytes);

template <>
inline Result<LoginRequest> decode_message<LoginRequest>(std::string_view bytes) {
  return codec_detail::read<LoginRequest>(bytes, [](codec_detail::ObjectReader& r) {
    LoginRequest m;
    m.username = r.string("username", kMaxUsernameLength);
    m.password = r.string("password", kMaxPasswordLength);
    m.mac = r.mac("mac", false);
    return m;
  });
}

template <>
inline Result<LoginResponse> decode_message<LoginResponse>(std::string_view bytes) {
  return codec_detail::read<LoginResponse>(bytes, [](codec_detail::ObjectReader& r) {
    LoginResponse m;
    m.first_name = r.string("first_name");
    m.last_name = r.string("last_name");
    m.institution = r.string("institution");
    m.token = r.token("token");
    return m;
  });
}

template <>
inline Result<IndexRequest> decode_message<IndexRequest>(std::string_view bytes) {
  return codec_detail::read<IndexRequest>(bytes, [](codec_detail::ObjectReader& r) {
    IndexRequest m;
    m.token = r.token("token");
    m.patient_id = r.string("patient_id", 64);
    if (auto mac = r.mac("mac", true)) m.mac = *mac;
    return m;
  });
}

template <>
inline Result<IndexResponse> decode_message<IndexResponse>(std::string_view bytes) {
  return codec_detail::read<IndexResponse>(bytes, [](codec_detail::ObjectReader& r) {
    IndexResponse m;
    if (const json* idx = r.object("index")) {
      auto parsed = codec_detail::index_from(*idx);
      if (parsed) m.index = *parsed;
      else r.fail(parsed.error().message);
    }
    m.token = r.token("token");
    return m;
  });
}

template <>
inline Result<IndexUpdate> decode_message<IndexUpdate>(std::string_view bytes) {
  return codec_detail::read<IndexUpdate>(bytes, [](codec_detail::ObjectReader& r) {
    IndexUpdate m;
    m.volume_ml = r.centi("volume_ml");
    m.rate_ml_h = r.centi("rate_ml_h");
    return m;
  });
}

template <>
inline Result<SetIndexResponse> decode_message<SetIndexResponse>(std::string_view bytes) {
  return codec_detail::read<SetIndexResponse>(bytes, [](codec_detail::ObjectReader& r) {
    return SetIndexResponse{r.unsigned_int("version")};
  });
}

template <>
inline Result<ResolveRequest> decode_message<ResolveRequest>(std::string_view bytes) {
  return codec_detail::read<ResolveRequest>(bytes, [](codec_detail::ObjectReader& r) {
    return ResolveRequest{r.boolean("approve")};
  });
}

template <>
inline Result<ResolveResponse> decode_message<ResolveResponse>(std::string_view bytes) {
  return codec_detail::read<ResolveResponse>(bytes, [](codec_detail::ObjectReader& r) {
    ResolveResponse m;
    m.approved = r.boolean("approved");
    if (r.find("version", false)) m.version = r.unsigned_int("version");
    return m;
  });
}

template <>
inline Result<DeviceEventRequest> decode_message<DeviceEventRequest>(std::string_view bytes) {
  return codec_detail::read<DeviceEventRequest>(bytes, [](codec_detail::ObjectReader& r) {
    DeviceEventRequest m;
    m.token = r.token("token");
    if (auto mac = r.mac("mac", true)) m.mac = *mac;
    auto ev = r.string("event");
    if (auto k = device_event_from_string(ev)) m.event = *k;
    else if (r.ok()) r.fail("unknown event kind '" + ev + "'");
    m.delivered_ml = r.centi("delivered_ml");
    if (r.ok() && m.delivered_ml < Centi{}) r.fail("delivered_ml must be non-negative");
    m.index_version = r.unsigned_int("index_version");
    return m;
  });
}

template <>
inline Result<DeviceEventResponse> decode_message<DeviceEventResponse>(std::string_view bytes) {
  return codec_detail::read<DeviceEventResponse>(bytes, [](codec_detail::ObjectReader& r) {
    return DeviceEventResponse{r.token("token")};
  });
}

/// Parses a server error body. Anything unparseable becomes Malformed.
inline ApiError decode_error(std::string_view bytes) {
  auto j = codec_detail::parse(bytes);
  if (!j || !j->is_object()) return make_error(ErrorCode::Malformed, "unreadable error body");
  auto code_it = j->find("error");
  if (code_it == j->end() || !code_it->is_string()) {
    return make_error(ErrorCode::Malformed, "error body lacks 'error'");
  }
  auto code = error_code_from_string(code_it->get<std::string>());
  std::string msg;
  if (auto m = j->find("message"); m != j->end() && m->is_string()) msg = m->get<std::string>();
  return make_error(code.value_or(ErrorCode::Malformed), std::move(msg));
}

}  // namespace infuse
