#pragma once

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace infuse::server {

/// scrypt cost parameters. `fast` exists for tests only.
struct KdfParams {
  std::uint64_t n = 1u << 14;
  std::uint64_t r = 8;
  std::uint64_t p = 1;

  static constexpr KdfParams strong() { return {1u << 14, 8, 1}; }
  static constexpr KdfParams fast() { return {16, 1, 1}; }

  static std::optional<KdfParams> from_mode(std::string_view mode) {
    if (mode == "strong") return strong();
    if (mode == "fast") return fast();
    return std::nullopt;
  }
};

namespace password_detail {

inline std::string to_hex(const unsigned char* p, std::size_t n) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = hex[p[i] >> 4];
    s[2 * i + 1] = hex[p[i] & 0xF];
  }
  return s;
}

inline std::optional<std::vector<unsigned char>> from_hex(std::string_view s) {
  if (s.size() % 2) return std::nullopt;
  std::vector<unsigned char> out(s.size() / 2);
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nib(s[2 * i]), lo = nib(s[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<unsigned char>(hi << 4 | lo);
  }
  return out;
}

inline std::array<unsigned char, 32> derive(std::string_view password,
                                            const std::vector<unsigned char>& salt,
                                            const KdfParams& k) {
  std::array<unsigned char, 32> key{};
  const std::uint64_t maxmem = 128 * k.r * k.n * k.p + (1u << 20) + 256 * k.r * k.p;
  if (EVP_PBE_scrypt(password.data(), password.size(), salt.data(), salt.size(), k.n, k.r, k.p,
                     maxmem, key.data(), key.size()) != 1) {
    throw std::runtime_error("scrypt derivation failed");
  }
  return key;
}

}  // namespace password_detail

/// Record format: `scrypt$N$r$p$<salt hex>$<key hex>`.
inline std::string hash_password(std::string_view password, const KdfParams& k) {
  std::vector<unsigned char> salt(16);
  if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  auto key = password_detail::derive(password, salt, k);
  std::ostringstream os;
  os << "scrypt$" << k.n << '$' << k.r << '$' << k.p << '$'
     << password_detail::to_hex(salt.data(), salt.size()) << '$'
     << password_detail::to_hex(key.data(), key.size());
  return os.str();
}

inline bool verify_password(std::string_view password, std::string_view record) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : record) {
    if (c == '$') {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(std::move(cur));
  if (parts.size() != 6 || parts[0] != "scrypt") return false;

  KdfParams k;
  try {
    k.n = std::stoull(parts[1]);
    k.r = std::stoull(parts[2]);
    k.p = std::stoull(parts[3]);
  } catch (const std::exception&) {
    return false;
  }
  auto salt = password_detail::from_hex(parts[4]);
  auto expected = password_detail::from_hex(parts[5]);
  if (!salt || !expected || expected->size() != 32) return false;

  auto key = password_detail::derive(password, *salt, k);
  return CRYPTO_memcmp(key.data(), expected->data(), key.size()) == 0;
}

}  // namespace infuse::server
