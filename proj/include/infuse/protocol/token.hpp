#pragma once

#include <openssl/rand.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "infuse/protocol/clock.hpp"

namespace infuse {

enum class TokenKind {
  LoginIssued,
  IndexIssued,
  // Long-lived, multi-use token handed to physician (console) logins.
  Session,
};

inline constexpr std::string_view to_string(TokenKind k) noexcept {
  switch (k) {
    case TokenKind::LoginIssued: return "LoginIssued";
    case TokenKind::IndexIssued: return "IndexIssued";
    case TokenKind::Session: return "Session";
  }
  return "?";
}

/// 128-bit random credential. With 2^128 values the birthday bound puts a
/// collision among 10^12 tokens at about 1.5e-15.
struct Token {
  std::string value;  // 32 lowercase hex chars
  TokenKind kind{TokenKind::LoginIssued};
  Millis issued_at{0};
  Millis ttl{0};
  bool consumed = false;

  /// now > issued_at + ttl. Pure in its arguments.
  constexpr bool expired(Millis now) const noexcept { return now > issued_at + ttl; }

  /// consumed only ever goes false -> true.
  void consume() noexcept { consumed = true; }
};

inline bool is_token_value(std::string_view s) noexcept {
  if (s.size() != 32) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

inline std::string random_token_value() {
  std::array<unsigned char, 16> raw{};
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(32, '0');
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[2 * i] = hex[raw[i] >> 4];
    out[2 * i + 1] = hex[raw[i] & 0xF];
  }
  return out;
}

/// Sub-millisecond TTLs are rounded up to 1 ms.
template <class Rep, class Period>
Token generate_token(TokenKind kind, Millis now, std::chrono::duration<Rep, Period> ttl) {
  if (!(ttl.count() > 0)) throw std::invalid_argument("token ttl must be positive");
  auto ms = std::chrono::ceil<Millis>(std::chrono::duration<double, std::milli>(ttl));
  if (ms.count() < 1) ms = Millis{1};
  return Token{random_token_value(), kind, now, ms, false};
}

}  // namespace infuse
