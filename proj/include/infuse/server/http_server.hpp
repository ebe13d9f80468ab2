#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "infuse/detail/httplib.hpp"
#include "infuse/server/router.hpp"

namespace infuse::server {

/// Serves a Router over HTTP/1.1 on a background thread.
class HttpServer {
 public:
  HttpServer(const Router& router, std::size_t workers = 16) : router_(router) {
    server_.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
    // Token state lives in this process, so a second instance must not share
    // the port. The library default sets SO_REUSEPORT.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    auto handler = [this](const httplib::Request& rq, httplib::Response& rs) {
      HttpRequest req;
      req.method = rq.method;
      req.path = rq.path;
      for (const auto& [k, v] : rq.params) req.query.emplace(k, v);
      req.authorization = rq.get_header_value("Authorization");
      req.body = rq.body;
      HttpReply reply = router_.dispatch(req);
      rs.status = reply.status;
      rs.set_content(reply.body, "application/json");
    };
    server_.Post(".*", handler);
    server_.Get(".*", handler);
  }

  ~HttpServer() { stop(); }
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts serving. Port 0 picks a free port. Returns the bound port.
  int start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  const Router& router_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace infuse::server
