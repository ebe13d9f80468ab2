#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include "infuse/protocol/codec.hpp"
#include "infuse/server/service.hpp"

namespace infuse::server {

/// Server settings. Loaded from a JSON file; any INFUSE_* environment
/// variable overrides the matching key.
///
///   key            env                    default
///   bind           INFUSE_BIND            127.0.0.1
///   port           INFUSE_PORT            8080
///   fixtures       INFUSE_FIXTURES        (required)
///   storage        INFUSE_STORAGE         :memory:
///   sync_writes    INFUSE_SYNC_WRITES     false
///   kdf            INFUSE_KDF             strong   (strong | fast)
///   workers        INFUSE_WORKERS         16
///   login_ttl_s    INFUSE_LOGIN_TTL_S     60
///   index_ttl_s    INFUSE_INDEX_TTL_S     300
///   session_ttl_s  INFUSE_SESSION_TTL_S   1800
struct ServerOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string fixtures;
  std::string storage = ":memory:";
  bool sync_writes = false;
  std::string kdf = "strong";
  std::size_t workers = 16;
  double login_ttl_s = 60;
  double index_ttl_s = 300;
  double session_ttl_s = 1800;

  ServiceConfig service_config() const {
    auto params = KdfParams::from_mode(kdf);
    if (!params) throw std::invalid_argument("kdf must be 'strong' or 'fast', got '" + kdf + "'");
    auto ms = [](double s) { return Millis{static_cast<std::int64_t>(s * 1000.0 + 0.5)}; };
    if (login_ttl_s <= 0 || index_ttl_s <= 0 || session_ttl_s <= 0) {
      throw std::invalid_argument("token TTLs must be positive");
    }
    return ServiceConfig{ms(login_ttl_s), ms(index_ttl_s), ms(session_ttl_s), *params};
  }
};

inline void apply_json(ServerOptions& o, const json& j) {
  o.bind = j.value("bind", o.bind);
  o.port = j.value("port", o.port);
  o.fixtures = j.value("fixtures", o.fixtures);
  o.storage = j.value("storage", o.storage);
  o.sync_writes = j.value("sync_writes", o.sync_writes);
  o.kdf = j.value("kdf", o.kdf);
  o.workers = j.value("workers", o.workers);
  o.login_ttl_s = j.value("login_ttl_s", o.login_ttl_s);
  o.index_ttl_s = j.value("index_ttl_s", o.index_ttl_s);
  o.session_ttl_s = j.value("session_ttl_s", o.session_ttl_s);
}

/// `getenv` is injectable for tests.
template <class GetEnv>
void apply_env(ServerOptions& o, GetEnv&& getenv_fn) {
  auto str = [&](const char* name, std::string& field) {
    if (const char* v = getenv_fn(name)) field = v;
  };
  auto num = [&](const char* name, auto& field) {
    if (const char* v = getenv_fn(name)) {
      try {
        field = static_cast<std::remove_reference_t<decltype(field)>>(std::stod(v));
      } catch (const std::exception&) {
        throw std::invalid_argument(std::string("bad numeric value in ") + name);
      }
    }
  };
  str("INFUSE_BIND", o.bind);
  num("INFUSE_PORT", o.port);
  str("INFUSE_FIXTURES", o.fixtures);
  str("INFUSE_STORAGE", o.storage);
  if (const char* v = getenv_fn("INFUSE_SYNC_WRITES")) {
    o.sync_writes = std::string(v) == "1" || std::string(v) == "true";
  }
  str("INFUSE_KDF", o.kdf);
  num("INFUSE_WORKERS", o.workers);
  num("INFUSE_LOGIN_TTL_S", o.login_ttl_s);
  num("INFUSE_INDEX_TTL_S", o.index_ttl_s);
  num("INFUSE_SESSION_TTL_S", o.session_ttl_s);
}

inline ServerOptions load_server_options(const std::optional<std::string>& path) {
  ServerOptions o;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw std::runtime_error("cannot open config: " + *path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw std::runtime_error("config is not a JSON object: " + *path);
    apply_json(o, j);
  }
  apply_env(o, [](const char* n) { return std::getenv(n); });
  return o;
}

inline std::unique_ptr<LogStorage> open_storage(const ServerOptions& o) {
  if (o.storage.empty() || o.storage == ":memory:") return std::make_unique<MemoryStorage>();
  return std::make_unique<FileStorage>(o.storage, o.sync_writes);
}

}  // namespace infuse::server
