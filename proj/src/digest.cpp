#include "eui64leak/digest.hpp"

#include <array>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <sodium.h>

#include "eui64leak/errors.hpp"

namespace eui64leak {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

std::string to_hex(const unsigned char* p, std::size_t n) {
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) fmt::format_to(std::back_inserter(out), "{:02x}", p[i]);
  return out;
}

}  // namespace

std::string digest_bytes(std::string_view data) {
  ensure_sodium();
  std::array<unsigned char, 32> out{};
  crypto_generichash(out.data(), out.size(), reinterpret_cast<const unsigned char*>(data.data()), data.size(),
                     nullptr, 0);
  return to_hex(out.data(), out.size());
}

std::string digest_file(const std::filesystem::path& path) {
  ensure_sodium();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, 32);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    auto got = in.gcount();
    if (got > 0) crypto_generichash_update(&st, reinterpret_cast<unsigned char*>(buf.data()), static_cast<unsigned long long>(got));
  }
  std::array<unsigned char, 32> out{};
  crypto_generichash_final(&st, out.data(), out.size());
  return to_hex(out.data(), out.size());
}

}  // namespace eui64leak
