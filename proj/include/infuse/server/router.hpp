#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "infuse/protocol/clock.hpp"
#include "infuse/protocol/codec.hpp"
#include "infuse/protocol/http.hpp"
#include "infuse/server/service.hpp"

namespace infuse::server {

/// Maps the documented HTTP surface onto AuthIndexService. Shared by the
/// real HTTP server and the in-process transport so both speak one wire format.
class Router {
 public:
  Router(AuthIndexService& service, const Clock& clock) : service_(service), clock_(clock) {}

  HttpReply dispatch(const HttpRequest& req) const {
    const Millis now = clock_.now();
    const auto parts = split_path(req.path);
    if (parts.size() < 2 || parts[0] != "api") return not_found();

    if (req.method == "POST" && parts.size() == 2 && parts[1] == "login") {
      return call<LoginRequest>(req.body, [&](const LoginRequest& m) {
        return service_.handle_login(m, now);
      });
    }
    if (req.method == "POST" && parts.size() == 2 && parts[1] == "index") {
      return call<IndexRequest>(req.body, [&](const IndexRequest& m) {
        return service_.handle_index(m, now);
      });
    }
    if (parts.size() < 4 || parts[1] != "patients") return not_found();

    const std::string& pid = parts[2];
    const std::string_view action = parts[3];
    const bool leaf = parts.size() == 4;

    if (req.method == "POST" && leaf && action == "index") {
      return call<IndexUpdate>(req.body, [&](const IndexUpdate& m) {
        return service_.set_infusion_index(bearer(req), pid, m, now);
      });
    }
    if (req.method == "POST" && leaf && action == "proposal") {
      return call<IndexUpdate>(req.body, [&](const IndexUpdate& m) -> Result<json> {
        auto st = service_.propose_index(pid, m, now);
        if (!st) return st.error();
        return json{{"status", "pending"}};
      });
    }
    if (req.method == "POST" && parts.size() == 5 && action == "proposal" &&
        parts[4] == "resolve") {
      return call<ResolveRequest>(req.body, [&](const ResolveRequest& m) {
        return service_.resolve_proposal(bearer(req), pid, m.approve, now);
      });
    }
    if (req.method == "POST" && leaf && action == "events") {
      return call<DeviceEventRequest>(req.body, [&](const DeviceEventRequest& m) {
        return service_.report_device_event(pid, m, now);
      });
    }
    if (req.method == "GET" && leaf && action == "history") {
      auto from = query_ms(req, "from_ms", std::numeric_limits<std::int64_t>::min());
      auto to = query_ms(req, "to_ms", std::numeric_limits<std::int64_t>::max());
      if (!from || !to) return error(make_error(ErrorCode::Malformed, "bad time range"));
      auto h = service_.get_history(bearer(req), pid, *from, *to, now);
      if (!h) return error(h.error());
      json entries = json::array();
      for (const auto& e : *h) entries.push_back(to_json(e));
      return HttpReply{200, json{{"entries", std::move(entries)}}.dump()};
    }
    if (req.method == "GET" && leaf && action == "status") {
      auto s = service_.get_status(bearer(req), pid, now);
      if (!s) return error(s.error());
      return HttpReply{200, to_json(*s, now).dump()};
    }
    return not_found();
  }

  static HttpReply error(const ApiError& e) { return HttpReply{http_status(e.code), to_json(e).dump()}; }

 private:
  static HttpReply not_found() { return error(make_error(ErrorCode::NotFound, "no such endpoint")); }

  template <class Msg, class Handler>
  static HttpReply call(const std::string& body, Handler&& handler) {
    auto msg = decode_message<Msg>(body);
    if (!msg) return error(msg.error());
    auto result = handler(*msg);
    if (!result) return error(result.error());
    return HttpReply{200, json(::infuse::to_json(*result)).dump()};
  }

  static std::string bearer(const HttpRequest& req) {
    constexpr std::string_view prefix = "Bearer ";
    if (req.authorization.rfind(prefix, 0) != 0) return {};
    return req.authorization.substr(prefix.size());
  }

  static std::optional<Millis> query_ms(const HttpRequest& req, const char* key,
                                        std::int64_t fallback) {
    auto it = req.query.find(key);
    if (it == req.query.end()) return Millis{fallback};
    try {
      std::size_t used = 0;
      auto v = std::stoll(it->second, &used);
      if (used != it->second.size()) return std::nullopt;
      return Millis{v};
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  static std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      std::size_t j = path.find('/', i);
      if (j == std::string_view::npos) j = path.size();
      if (j > i) out.emplace_back(path.substr(i, j - i));
      i = j;
    }
    return out;
  }

  AuthIndexService& service_;
  const Clock& clock_;
};

}  // namespace infuse::server
