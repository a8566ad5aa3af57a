#include "condforge/content_hash.hpp"

#include <sodium.h>

#include <mutex>

#include "condforge/error.hpp"

namespace condforge {
namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw Error("libsodium initialisation failed");
  });
}

}  // namespace

std::string ContentId::hex() const {
  std::string out(bytes.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes.data(), bytes.size());
  out.pop_back();
  return out;
}

ContentId ContentId::from_hex(std::string_view hex) {
  ContentId id;
  std::size_t len = 0;
  if (hex.size() != 32 ||
      sodium_hex2bin(id.bytes.data(), id.bytes.size(), hex.data(), hex.size(), nullptr, &len,
                     nullptr) != 0 ||
      len != id.bytes.size()) {
    throw Error("invalid content id '" + std::string(hex) + "'");
  }
  return id;
}

ContentId content_id(std::span<const std::uint8_t> data) {
  ensure_sodium();
  ContentId id;
  crypto_generichash(id.bytes.data(), id.bytes.size(), data.data(), data.size(), nullptr, 0);
  return id;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  ensure_sodium();
  const auto variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_ENCODED_LEN(data.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
  out.resize(out.size() - 1);
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  ensure_sodium();
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), "\r\n", &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error("malformed base64 payload");
  }
  out.resize(len);
  return out;
}

}  // namespace condforge
