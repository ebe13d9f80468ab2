#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "infuse/protocol/codec.hpp"
#include "infuse/protocol/messages.hpp"
#include "infuse/server/password.hpp"

namespace infuse::server {

enum class Role { Physician, Patient };

struct Account {
  std::string username;
  std::string password_record;  // scrypt record, never the clear password
  Role role{Role::Patient};
  std::string first_name;
  std::string last_name;
  std::string institution;
  std::set<MacAddress> registered_macs;
  std::optional<std::string> patient_id;  // patient accounts only
};

struct Limits {
  Centi max_volume_ml;
  Centi min_rate_ml_h = kMinRate;
  Centi max_rate_ml_h = kMaxRate;

  bool valid() const noexcept {
    return max_volume_ml > Centi{} && min_rate_ml_h >= kMinRate && max_rate_ml_h <= kMaxRate &&
           min_rate_ml_h <= max_rate_ml_h;
  }

  bool allows(Centi volume, Centi rate) const noexcept {
    return volume > Centi{} && volume <= max_volume_ml && rate >= min_rate_ml_h &&
           rate <= max_rate_ml_h;
  }
  bool allows(const InfusionIndex& idx) const noexcept { return allows(idx.volume(), idx.rate()); }
};

struct PatientProfile {
  std::string patient_id;
  std::string physician_username;
  Limits limits;
  InfusionIndex current_index;
  std::optional<InfusionIndex> pending_proposal;  // version 0 until approved
};

struct Fixtures {
  std::vector<Account> accounts;
  std::vector<PatientProfile> patients;
};

inline json to_json(const Limits& l) {
  return json{{"max_volume_ml", l.max_volume_ml.value()},
              {"min_rate_ml_h", l.min_rate_ml_h.value()},
              {"max_rate_ml_h", l.max_rate_ml_h.value()}};
}

namespace fixture_detail {

inline Centi centi(const json& j, const char* key) {
  auto c = Centi::from_double_exact(j.at(key).get<double>());
  if (!c) throw std::invalid_argument(std::string("fixture field '") + key + "' needs 2 decimals");
  return *c;
}

}  // namespace fixture_detail

/// Seed file layout:
/// {
///   "accounts": [{"username", "password" | "password_hash", "role": "physician"|"patient",
///                 "first_name", "last_name", "institution", "macs": [...], "patient_id"?}],
///   "patients": [{"patient_id", "physician", "limits": {...}, "index": {"volume_ml", "rate_ml_h"}}]
/// }
/// Clear passwords are hashed on load with `kdf`. Initial indices get version 1.
inline Fixtures parse_fixtures(const json& j, const KdfParams& kdf) {
  using fixture_detail::centi;
  Fixtures f;
  std::set<std::string> usernames;
  for (const auto& a : j.at("accounts")) {
    Account acc;
    acc.username = a.at("username").get<std::string>();
    if (acc.username.empty() || acc.username.size() > kMaxUsernameLength) {
      throw std::invalid_argument("fixture username has bad length");
    }
    if (!usernames.insert(acc.username).second) {
      throw std::invalid_argument("duplicate username '" + acc.username + "'");
    }
    if (a.contains("password_hash")) {
      acc.password_record = a.at("password_hash").get<std::string>();
    } else {
      acc.password_record = hash_password(a.at("password").get<std::string>(), kdf);
    }
    const auto role = a.at("role").get<std::string>();
    if (role == "physician") acc.role = Role::Physician;
    else if (role == "patient") acc.role = Role::Patient;
    else throw std::invalid_argument("unknown role '" + role + "'");
    acc.first_name = a.value("first_name", "");
    acc.last_name = a.value("last_name", "");
    acc.institution = a.value("institution", "");
    for (const auto& m : a.value("macs", json::array())) {
      auto mac = MacAddress::parse(m.get<std::string>());
      if (!mac) throw std::invalid_argument("non-canonical MAC in fixtures: " + m.dump());
      acc.registered_macs.insert(*mac);
    }
    if (a.contains("patient_id")) acc.patient_id = a.at("patient_id").get<std::string>();
    f.accounts.push_back(std::move(acc));
  }
  for (const auto& p : j.at("patients")) {
    PatientProfile prof;
    prof.patient_id = p.at("patient_id").get<std::string>();
    prof.physician_username = p.at("physician").get<std::string>();
    const auto& l = p.at("limits");
    prof.limits.max_volume_ml = centi(l, "max_volume_ml");
    if (l.contains("min_rate_ml_h")) prof.limits.min_rate_ml_h = centi(l, "min_rate_ml_h");
    if (l.contains("max_rate_ml_h")) prof.limits.max_rate_ml_h = centi(l, "max_rate_ml_h");
    if (!prof.limits.valid()) throw std::invalid_argument("invalid limits for " + prof.patient_id);
    const auto& idx = p.at("index");
    auto made = InfusionIndex::make(centi(idx, "volume_ml"), centi(idx, "rate_ml_h"), 1);
    if (!made || !prof.limits.allows(*made)) {
      throw std::invalid_argument("initial index for " + prof.patient_id + " violates limits");
    }
    prof.current_index = *made;
    f.patients.push_back(std::move(prof));
  }
  return f;
}

inline Fixtures load_fixtures(const std::string& path, const KdfParams& kdf) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fixtures file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("fixtures file is not JSON: " + path);
  return parse_fixtures(j, kdf);
}

}  // namespace infuse::server
