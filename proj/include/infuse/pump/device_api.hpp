#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "infuse/detail/httplib.hpp"
#include "infuse/protocol/codec.hpp"
#include "infuse/protocol/http.hpp"

namespace infuse::pump {

/// What the pump firmware can ask of the server.
class DeviceApi {
 public:
  virtual ~DeviceApi() = default;
  virtual Result<LoginResponse> login(const LoginRequest& req) = 0;
  virtual Result<IndexResponse> index(const IndexRequest& req) = 0;
  virtual Result<DeviceEventResponse> report(const std::string& patient_id,
                                             const DeviceEventRequest& req) = 0;
};

/// DeviceApi over any POST function that speaks the JSON wire format.
/// A missing reply means the transport failed (Unavailable).
class WireDeviceApi : public DeviceApi {
 public:
  using Post = std::function<std::optional<HttpReply>(const std::string& path, const std::string& body)>;

  explicit WireDeviceApi(Post post) : post_(std::move(post)) {}

  Result<LoginResponse> login(const LoginRequest& req) override {
    return exchange<LoginResponse>("/api/login", encode_message(req));
  }
  Result<IndexResponse> index(const IndexRequest& req) override {
    return exchange<IndexResponse>("/api/index", encode_message(req));
  }
  Result<DeviceEventResponse> report(const std::string& patient_id,
                                     const DeviceEventRequest& req) override {
    return exchange<DeviceEventResponse>("/api/patients/" + patient_id + "/events",
                                         encode_message(req));
  }

 private:
  template <class Resp>
  Result<Resp> exchange(const std::string& path, const std::string& body) {
    auto reply = post_(path, body);
    if (!reply) return make_error(ErrorCode::Unavailable, "no response from " + path);
    if (reply->status != 200) return decode_error(reply->body);
    return decode_message<Resp>(reply->body);
  }

  Post post_;
};

/// Dispatches straight into an in-process handler (e.g. server::Router).
template <class Handler>
std::unique_ptr<DeviceApi> make_local_device_api(const Handler& handler) {
  return std::make_unique<WireDeviceApi>(
      [&handler](const std::string& path, const std::string& body) -> std::optional<HttpReply> {
        return handler.dispatch(HttpRequest{"POST", path, {}, {}, body});
      });
}

/// HTTP/1.1 client against a running server, e.g. "http://127.0.0.1:8080".
class HttpDeviceApi final : public WireDeviceApi {
 public:
  explicit HttpDeviceApi(const std::string& base_url)
      : WireDeviceApi([this](const std::string& path, const std::string& body) {
          return post(path, body);
        }),
        client_(base_url) {
    client_.set_connection_timeout(2, 0);
    client_.set_read_timeout(5, 0);
    client_.set_write_timeout(5, 0);
  }

 private:
  std::optional<HttpReply> post(const std::string& path, const std::string& body) {
    std::lock_guard lk(mu_);
    auto res = client_.Post(path, body, "application/json");
    if (!res) return std::nullopt;
    return HttpReply{res->status, res->body};
  }

  std::mutex mu_;
  httplib::Client client_;
};

/// Wraps another DeviceApi and records every token value the device sends.
class RecordingDeviceApi final : public DeviceApi {
 public:
  explicit RecordingDeviceApi(DeviceApi& inner) : inner_(inner) {}

  Result<LoginResponse> login(const LoginRequest& req) override {
    ++logins_;
    return inner_.login(req);
  }
  Result<IndexResponse> index(const IndexRequest& req) override {
    sent_tokens_.push_back(req.token);
    ++polls_;
    return inner_.index(req);
  }
  Result<DeviceEventResponse> report(const std::string& patient_id,
                                     const DeviceEventRequest& req) override {
    sent_tokens_.push_back(req.token);
    return inner_.report(patient_id, req);
  }

  const std::vector<std::string>& sent_tokens() const noexcept { return sent_tokens_; }
  int logins() const noexcept { return logins_; }
  int index_calls() const noexcept { return polls_; }

 private:
  DeviceApi& inner_;
  std::vector<std::string> sent_tokens_;
  int logins_ = 0;
  int polls_ = 0;
};

}  // namespace infuse::pump
