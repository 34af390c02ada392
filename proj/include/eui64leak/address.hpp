#pragma once

// Bit-exact IPv6 address algebra: parsing/formatting, prefix and interface
// identifier extraction, EUI-64 construction and inversion.

#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace eui64leak {

// 128-bit IPv6 address. `hi` holds the first 8 octets in network order
// (most significant octet in the top byte), `lo` the last 8.
struct Address128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  constexpr Address128() = default;
  constexpr Address128(std::uint64_t high, std::uint64_t low) : hi(high), lo(low) {}

  constexpr std::uint8_t octet(int i) const noexcept {
    return i < 8 ? static_cast<std::uint8_t>(hi >> (8 * (7 - i)))
                 : static_cast<std::uint8_t>(lo >> (8 * (15 - i)));
  }

  friend constexpr auto operator<=>(const Address128&, const Address128&) = default;
};

// Interface identifier: the low 64 bits of an address. Octet 0 is the most
// significant byte.
struct Iid64 {
  std::uint64_t bits = 0;

  constexpr std::uint8_t octet(int i) const noexcept {
    return static_cast<std::uint8_t>(bits >> (8 * (7 - i)));
  }

  friend constexpr auto operator<=>(const Iid64&, const Iid64&) = default;
};

// 24-bit Organizationally Unique Identifier.
struct Oui {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(const Oui&, const Oui&) = default;
};

struct Mac48 {
  std::array<std::uint8_t, 6> octets{};

  constexpr Oui oui() const noexcept {
    return Oui{(std::uint32_t{octets[0]} << 16) | (std::uint32_t{octets[1]} << 8) | octets[2]};
  }
  constexpr bool locally_administered() const noexcept { return (octets[0] & 0x02) != 0; }

  friend constexpr auto operator<=>(const Mac48&, const Mac48&) = default;
};

// An address prefix; all bits below `length` are zero.
struct Prefix {
  Address128 bits;
  int length = 0;

  friend constexpr auto operator<=>(const Prefix&, const Prefix&) = default;
};

Address128 parse_address(std::string_view text);
// RFC 5952 canonical form (lowercase, longest zero run compressed,
// IPv4-mapped addresses in dotted-quad tail form).
std::string format_address(const Address128& addr);

// Masks `addr` to `length` bits, any length in 0..128.
Address128 mask_address(const Address128& addr, int length);
Prefix make_prefix(const Address128& addr, int length);
// Restricted to the two aggregation levels used by the analysis: /56 and /64.
Prefix prefix_of(const Address128& addr, int length);
bool contains(const Prefix& prefix, const Address128& addr) noexcept;
Prefix parse_prefix(std::string_view text);
std::string format_prefix(const Prefix& prefix);

constexpr Iid64 iid_of(const Address128& addr) noexcept { return Iid64{addr.lo}; }
// Re-composes a /64 prefix with an interface identifier.
Address128 compose(const Prefix& prefix64, Iid64 iid);

constexpr std::uint8_t kUniversalLocalBit = 0x02;

constexpr bool is_eui64(Iid64 iid) noexcept {
  return iid.octet(3) == 0xFF && iid.octet(4) == 0xFE;
}

Mac48 mac_from_eui64(Iid64 iid);
Iid64 eui64_from_mac(const Mac48& mac) noexcept;

constexpr int hamming_weight(Iid64 iid) noexcept { return std::popcount(iid.bits); }

Mac48 parse_mac(std::string_view text);
std::string format_mac(const Mac48& mac);
Oui parse_oui(std::string_view six_hex_digits);
std::string format_oui(Oui oui);  // "001122"

struct Address128Hash {
  std::size_t operator()(const Address128& a) const noexcept {
    std::uint64_t x = a.hi * 0x9E3779B97F4A7C15ULL ^ (a.lo + 0x632BE59BD9B4E019ULL);
    x ^= x >> 31;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 29;
    return static_cast<std::size_t>(x);
  }
};

}  // namespace eui64leak

template <>
struct std::hash<eui64leak::Iid64> {
  std::size_t operator()(eui64leak::Iid64 v) const noexcept { return std::hash<std::uint64_t>{}(v.bits); }
};

template <>
struct std::hash<eui64leak::Oui> {
  std::size_t operator()(eui64leak::Oui v) const noexcept { return std::hash<std::uint32_t>{}(v.value); }
};
