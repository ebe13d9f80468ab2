#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace infuse {

enum class ErrorCode {
  BadCredentials,
  UnknownDevice,
  TokenExpired,
  TokenConsumed,
  TokenUnknown,
  LimitViolation,
  NotFound,
  Malformed,
  // Client-side only: the request never produced a server answer.
  Unavailable,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadCredentials: return "BadCredentials";
    case ErrorCode::UnknownDevice: return "UnknownDevice";
    case ErrorCode::TokenExpired: return "TokenExpired";
    case ErrorCode::TokenConsumed: return "TokenConsumed";
    case ErrorCode::TokenUnknown: return "TokenUnknown";
    case ErrorCode::LimitViolation: return "LimitViolation";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::Unavailable: return "Unavailable";
  }
  return "Unavailable";
}

inline std::optional<ErrorCode> error_code_from_string(std::string_view s) noexcept {
  for (auto c : {ErrorCode::BadCredentials, ErrorCode::UnknownDevice, ErrorCode::TokenExpired,
                 ErrorCode::TokenConsumed, ErrorCode::TokenUnknown, ErrorCode::LimitViolation,
                 ErrorCode::NotFound, ErrorCode::Malformed, ErrorCode::Unavailable}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

/// HTTP status carried by each error code. One status per code.
inline constexpr int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Malformed: return 400;
    case ErrorCode::BadCredentials:
    case ErrorCode::TokenExpired:
    case ErrorCode::TokenConsumed:
    case ErrorCode::TokenUnknown: return 401;
    case ErrorCode::UnknownDevice: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::LimitViolation: return 422;
    case ErrorCode::Unavailable: return 503;
  }
  return 503;
}

inline constexpr bool is_token_error(ErrorCode code) noexcept {
  return code == ErrorCode::TokenExpired || code == ErrorCode::TokenConsumed ||
         code == ErrorCode::TokenUnknown;
}

struct ApiError {
  ErrorCode code{ErrorCode::Malformed};
  std::string message;

  friend bool operator==(const ApiError&, const ApiError&) = default;
};

inline ApiError make_error(ErrorCode code, std::string message = {}) {
  return ApiError{code, std::move(message)};
}

/// Value-or-ApiError. Minimal stand-in for std::expected, which this toolchain lacks.
template <class T>
class Result {
 public:
  Result(T value) : state_(std::in_place_index<0>, std::move(value)) {}  // NOLINT
  Result(ApiError error) : state_(std::in_place_index<1>, std::move(error)) {}  // NOLINT

  [[nodiscard]] bool ok() const noexcept { return state_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  T& value() & { return std::get<0>(state_); }
  const T& value() const& { return std::get<0>(state_); }
  T&& value() && { return std::get<0>(std::move(state_)); }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

  const ApiError& error() const { return std::get<1>(state_); }
  ErrorCode code() const { return error().code; }

 private:
  std::variant<T, ApiError> state_;
};

using Status = Result<std::monostate>;

inline Status ok_status() { return Status{std::monostate{}}; }

}  // namespace infuse
