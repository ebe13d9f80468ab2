#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace infuse {

/// 48-bit hardware address. Canonical text form is `AA:BB:CC:DD:EE:FF`
/// (uppercase hex); parsing accepts nothing else.
class MacAddress {
 public:
  using Octets = std::array<std::uint8_t, 6>;

  constexpr MacAddress() = default;
  constexpr explicit MacAddress(Octets o) : octets_(o) {}

  static std::optional<MacAddress> parse(std::string_view s) noexcept {
    if (s.size() != 17) return std::nullopt;
    Octets o{};
    for (std::size_t i = 0; i < 6; ++i) {
      const std::size_t p = i * 3;
      if (i < 5 && s[p + 2] != ':') return std::nullopt;
      const int hi = nibble(s[p]);
      const int lo = nibble(s[p + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      o[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return MacAddress{o};
  }

  std::string str() const {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(17);
    for (std::size_t i = 0; i < 6; ++i) {
      if (i) out.push_back(':');
      out.push_back(hex[octets_[i] >> 4]);
      out.push_back(hex[octets_[i] & 0xF]);
    }
    return out;
  }

  constexpr const Octets& octets() const noexcept { return octets_; }

  friend constexpr auto operator<=>(const MacAddress&, const MacAddress&) = default;

 private:
  static constexpr int nibble(char c) noexcept {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;  // lowercase is non-canonical
  }

  Octets octets_{};
};

}  // namespace infuse
