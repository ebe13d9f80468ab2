#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace infuse {

/// Fixed-point quantity with two fractional digits (hundredths).
/// Volumes and rates travel in this form so the wire never drifts.
class Centi {
 public:
  constexpr Centi() = default;

  static constexpr Centi from_hundredths(std::int64_t h) noexcept { return Centi{h}; }

  /// Accepts only values that sit on a hundredth (within 1e-6).
  static std::optional<Centi> from_double_exact(double v) noexcept {
    if (!std::isfinite(v) || std::fabs(v) > 1e15) return std::nullopt;
    const double scaled = v * 100.0;
    const double r = std::round(scaled);
    if (std::fabs(scaled - r) > 1e-6) return std::nullopt;
    return Centi{static_cast<std::int64_t>(r)};
  }

  static Centi round(double v) noexcept {
    return Centi{static_cast<std::int64_t>(std::llround(v * 100.0))};
  }

  constexpr std::int64_t hundredths() const noexcept { return h_; }
  constexpr double value() const noexcept { return static_cast<double>(h_) / 100.0; }

  std::string str() const {
    char buf[32];
    const std::int64_t a = h_ < 0 ? -h_ : h_;
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", h_ < 0 ? "-" : "",
                  static_cast<long long>(a / 100), static_cast<long long>(a % 100));
    return buf;
  }

  friend constexpr auto operator<=>(Centi, Centi) = default;

 private:
  constexpr explicit Centi(std::int64_t h) : h_(h) {}
  std::int64_t h_ = 0;
};

}  // namespace infuse
