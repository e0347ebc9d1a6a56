#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "mtlfilm/error.hpp"

namespace mtlfilm::crypto {

inline std::string to_hex(const unsigned char* data, std::size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (std::size_t k = 0; k < len; ++k) {
    out += kDigits[data[k] >> 4];
    out += kDigits[data[k] & 0xF];
  }
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) == 1,
          "SHA-256 failed");
  return to_hex(digest, len);
}

inline std::string hmac_sha256_hex(std::string_view key, std::string_view message) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const auto* out = HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
                         reinterpret_cast<const unsigned char*>(message.data()), message.size(),
                         digest, &len);
  require(out != nullptr, "HMAC-SHA256 failed");
  return to_hex(digest, len);
}

inline std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(content);
}

}  // namespace mtlfilm::crypto
