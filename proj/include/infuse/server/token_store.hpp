#pragma once

#include <array>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "infuse/protocol/error.hpp"
#include "infuse/protocol/token.hpp"

namespace infuse::server {

/// Issued tokens plus who they belong to. Each value lives in one shard and
/// every read-modify-write on it happens under that shard's mutex, so
/// consume() is linearizable per value.
class TokenStore {
 public:
  struct Entry {
    Token token;
    std::string owner;  // account username
  };

  /// Expired tokens are kept this long so late presentations still answer
  /// TokenExpired/TokenConsumed instead of TokenUnknown.
  explicit TokenStore(Millis retention = Millis{15 * 60 * 1000}) : retention_(retention) {}

  Token issue(TokenKind kind, std::string owner, Millis now, Millis ttl) {
    Token t = generate_token(kind, now, ttl);
    auto& s = shard(t.value);
    std::lock_guard lk(s.mu);
    if (++s.issued_since_purge >= kPurgeEvery) purge_locked(s, now);
    s.map.emplace(t.value, Entry{t, std::move(owner)});
    return t;
  }

  std::optional<Entry> peek(const std::string& value) const {
    auto& s = shard(value);
    std::lock_guard lk(s.mu);
    auto it = s.map.find(value);
    if (it == s.map.end()) return std::nullopt;
    return it->second;
  }

  /// Expiry dominates: an expired token answers TokenExpired even if unused.
  Status consume(const std::string& value, Millis now) {
    auto& s = shard(value);
    std::lock_guard lk(s.mu);
    auto it = s.map.find(value);
    if (it == s.map.end()) return make_error(ErrorCode::TokenUnknown, "token not recognised");
    Token& t = it->second.token;
    if (t.expired(now)) return make_error(ErrorCode::TokenExpired, "token expired");
    if (t.consumed) return make_error(ErrorCode::TokenConsumed, "token already used");
    t.consume();
    return ok_status();
  }

  /// Multi-use check for session tokens. Returns the owner.
  Result<std::string> check_session(const std::string& value, Millis now) const {
    auto& s = shard(value);
    std::lock_guard lk(s.mu);
    auto it = s.map.find(value);
    if (it == s.map.end() || it->second.token.kind != TokenKind::Session) {
      return make_error(ErrorCode::TokenUnknown, "session not recognised");
    }
    if (it->second.token.expired(now)) return make_error(ErrorCode::TokenExpired, "session expired");
    return it->second.owner;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (auto& s : shards_) {
      std::lock_guard lk(s.mu);
      n += s.map.size();
    }
    return n;
  }

 private:
  static constexpr std::size_t kShards = 16;
  static constexpr std::size_t kPurgeEvery = 1024;

  struct Shard {
    mutable std::mutex mu;
    std::unordered_map<std::string, Entry> map;
    std::size_t issued_since_purge = 0;
  };

  Shard& shard(const std::string& v) { return shards_[std::hash<std::string>{}(v) % kShards]; }
  const Shard& shard(const std::string& v) const {
    return shards_[std::hash<std::string>{}(v) % kShards];
  }

  void purge_locked(Shard& s, Millis now) {
    s.issued_since_purge = 0;
    std::erase_if(s.map, [&](const auto& kv) {
      const Token& t = kv.second.token;
      return now > t.issued_at + t.ttl + retention_;
    });
  }

  Millis retention_;
  std::array<Shard, kShards> shards_;
};

}  // namespace infuse::server
