#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "infuse/protocol/decimal.hpp"
#include "infuse/protocol/error.hpp"
#include "infuse/protocol/mac_address.hpp"

namespace infuse {

inline constexpr std::size_t kMaxUsernameLength = 64;
inline constexpr std::size_t kMaxPasswordLength = 128;

/// Pump hardware rate envelope, mL/h.
inline constexpr Centi kMinRate = Centi::from_hundredths(10);
inline constexpr Centi kMaxRate = Centi::from_hundredths(20000);

struct Credentials {
  std::string username;
  std::string password;

  bool valid() const noexcept {
    return !username.empty() && username.size() <= kMaxUsernameLength && !password.empty() &&
           password.size() <= kMaxPasswordLength;
  }
  friend bool operator==(const Credentials&, const Credentials&) = default;
};

/// Prescribed (volume, rate) plus the per-patient version it was accepted under.
class InfusionIndex {
 public:
  InfusionIndex() = default;

  /// Fails with LimitViolation when volume <= 0 or rate leaves [0.1, 200] mL/h.
  static Result<InfusionIndex> make(Centi volume_ml, Centi rate_ml_h, std::uint64_t version) {
    if (volume_ml <= Centi{}) return make_error(ErrorCode::LimitViolation, "volume must be positive");
    if (rate_ml_h < kMinRate || rate_ml_h > kMaxRate) {
      return make_error(ErrorCode::LimitViolation, "rate outside 0.10-200.00 mL/h");
    }
    return InfusionIndex{volume_ml, rate_ml_h, version};
  }

  Centi volume() const noexcept { return volume_; }
  Centi rate() const noexcept { return rate_; }
  std::uint64_t version() const noexcept { return version_; }

  InfusionIndex with_version(std::uint64_t v) const { return InfusionIndex{volume_, rate_, v}; }

  friend bool operator==(const InfusionIndex&, const InfusionIndex&) = default;

 private:
  InfusionIndex(Centi v, Centi r, std::uint64_t ver) : volume_(v), rate_(r), version_(ver) {}

  Centi volume_ = Centi::from_hundredths(1);
  Centi rate_ = kMinRate;
  std::uint64_t version_ = 0;
};

struct LoginRequest {
  std::string username;
  std::string password;
  // Required for device (patient) accounts; physician console logins omit it.
  std::optional<MacAddress> mac;
  friend bool operator==(const LoginRequest&, const LoginRequest&) = default;
};

struct LoginResponse {
  std::string first_name;
  std::string last_name;
  std::string institution;
  std::string token;
  friend bool operator==(const LoginResponse&, const LoginResponse&) = default;
};

struct IndexRequest {
  std::string token;
  std::string patient_id;
  MacAddress mac;
  friend bool operator==(const IndexRequest&, const IndexRequest&) = default;
};

struct IndexResponse {
  InfusionIndex index;
  std::string token;
  friend bool operator==(const IndexResponse&, const IndexResponse&) = default;
};

/// Body of set-index and proposal calls: a candidate (volume, rate) without a version.
struct IndexUpdate {
  Centi volume_ml;
  Centi rate_ml_h;
  friend bool operator==(const IndexUpdate&, const IndexUpdate&) = default;
};

struct SetIndexResponse {
  std::uint64_t version = 0;
  friend bool operator==(const SetIndexResponse&, const SetIndexResponse&) = default;
};

struct ResolveRequest {
  bool approve = false;
  friend bool operator==(const ResolveRequest&, const ResolveRequest&) = default;
};

struct ResolveResponse {
  bool approved = false;
  std::optional<std::uint64_t> version;  // set when approved
  friend bool operator==(const ResolveResponse&, const ResolveResponse&) = default;
};

enum class DeviceEventKind { InfusionStarted, InfusionCompleted, DeviceReport };

struct DeviceEventRequest {
  std::string token;
  MacAddress mac;
  DeviceEventKind event{DeviceEventKind::DeviceReport};
  Centi delivered_ml;
  std::uint64_t index_version = 0;
  friend bool operator==(const DeviceEventRequest&, const DeviceEventRequest&) = default;
};

struct DeviceEventResponse {
  std::string token;
  friend bool operator==(const DeviceEventResponse&, const DeviceEventResponse&) = default;
};

}  // namespace infuse
