#pragma once

#include <memory>
#include <random>
#include <string>

#include "infuse/infuse.hpp"

namespace infuse::testing {

inline constexpr const char* kDoctor = "dr.kim";
inline constexpr const char* kDoctorPw = "kim-secret";
inline constexpr const char* kOtherDoctor = "dr.lee";
inline constexpr const char* kPumpUser = "pump01";
inline constexpr const char* kPumpPw = "pump01-secret";
inline constexpr const char* kPatient = "P001";
inline constexpr const char* kOtherPatient = "P002";

inline MacAddress mac(const char* s) { return *MacAddress::parse(s); }
inline MacAddress pump_mac() { return mac("AA:BB:CC:DD:EE:01"); }
inline MacAddress stranger_mac() { return mac("AA:BB:CC:DD:EE:99"); }

// Two physicians, each with one patient and one pump account.
// P001 limits: volume <= 10 mL, rate 0.10-200; index 2.00 @ 4.00, v1.
// P002 limits: volume <= 3 mL, rate 1.00-50;  index 1.00 @ 2.00, v1.
inline json clinic_json() {
  auto limits = [](double v, double lo, double hi) {
    return json{{"max_volume_ml", v}, {"min_rate_ml_h", lo}, {"max_rate_ml_h", hi}};
  };
  return json{
      {"accounts",
       json::array({
           {{"username", kDoctor}, {"password", kDoctorPw}, {"role", "physician"},
            {"first_name", "Mina"}, {"last_name", "Kim"}, {"institution", "North Clinic"}},
           {{"username", kOtherDoctor}, {"password", "lee-secret"}, {"role", "physician"},
            {"first_name", "Jo"}, {"last_name", "Lee"}, {"institution", "South Clinic"}},
           {{"username", kPumpUser}, {"password", kPumpPw}, {"role", "patient"},
            {"first_name", "Ada"}, {"last_name", "Stone"}, {"institution", "North Clinic"},
            {"macs", json::array({"AA:BB:CC:DD:EE:01"})}, {"patient_id", kPatient}},
           {{"username", "pump02"}, {"password", "pump02-secret"}, {"role", "patient"},
            {"first_name", "Bo"}, {"last_name", "Ray"}, {"institution", "South Clinic"},
            {"macs", json::array({"AA:BB:CC:DD:EE:02"})}, {"patient_id", kOtherPatient}},
           {{"username", "pump03"}, {"password", "pump03-secret"}, {"role", "patient"},
            {"first_name", "No"}, {"last_name", "Device"}, {"institution", "North Clinic"},
            {"patient_id", kPatient}},
       })},
      {"patients",
       json::array({
           {{"patient_id", kPatient}, {"physician", kDoctor}, {"limits", limits(10.0, 0.1, 200.0)},
            {"index", {{"volume_ml", 2.0}, {"rate_ml_h", 4.0}}}},
           {{"patient_id", kOtherPatient}, {"physician", kOtherDoctor},
            {"limits", limits(3.0, 1.0, 50.0)}, {"index", {{"volume_ml", 1.0}, {"rate_ml_h", 2.0}}}},
       })}};
}

inline server::ServiceConfig fast_config() {
  server::ServiceConfig c;
  c.kdf = server::KdfParams::fast();
  return c;
}

inline std::unique_ptr<server::AuthIndexService> make_service(
    server::ServiceConfig cfg = fast_config(),
    std::unique_ptr<server::LogStorage> storage = std::make_unique<server::MemoryStorage>()) {
  return std::make_unique<server::AuthIndexService>(
      server::parse_fixtures(clinic_json(), server::KdfParams::fast()), cfg, std::move(storage));
}

inline std::string pump_login(server::AuthIndexService& s, Millis now) {
  auto r = s.handle_login(LoginRequest{kPumpUser, kPumpPw, pump_mac()}, now);
  return r ? r->token : std::string{};
}

inline std::string doctor_login(server::AuthIndexService& s, Millis now,
                                const char* user = kDoctor, const char* pw = kDoctorPw) {
  auto r = s.handle_login(LoginRequest{user, pw, std::nullopt}, now);
  return r ? r->token : std::string{};
}

inline IndexUpdate update(double v, double r) {
  return IndexUpdate{Centi::round(v), Centi::round(r)};
}

inline pump::PumpConfig pump_config() {
  pump::PumpConfig c;
  c.credentials = {kPumpUser, kPumpPw};
  c.mac = pump_mac();
  c.patient_id = kPatient;
  return c;
}

// A service, its router and a device API wired through the JSON codec.
struct Bench {
  VirtualClock clock;
  std::unique_ptr<server::AuthIndexService> service;
  std::unique_ptr<server::Router> router;
  std::unique_ptr<pump::DeviceApi> api;

  explicit Bench(server::ServiceConfig cfg = fast_config())
      : service(make_service(cfg)),
        router(std::make_unique<server::Router>(*service, clock)),
        api(pump::make_local_device_api(*router)) {}
};

}  // namespace infuse::testing
