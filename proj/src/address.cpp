#include "eui64leak/address.hpp"

#include <charconv>
#include <fmt/format.h>

#include "eui64leak/errors.hpp"

namespace eui64leak {

namespace {

int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

[[noreturn]] void fail(std::string_view text, std::size_t pos, std::string_view why) {
  throw ParseError(fmt::format("invalid IPv6 address '{}' at position {}: {}", text, pos, why), pos);
}

// Parses a dotted-quad IPv4 tail starting at `pos`; it must run to the end.
std::uint32_t parse_ipv4_tail(std::string_view text, std::size_t pos) {
  std::uint32_t value = 0;
  for (int part = 0; part < 4; ++part) {
    if (part > 0) {
      if (pos >= text.size() || text[pos] != '.') fail(text, pos, "expected '.' in IPv4 tail");
      ++pos;
    }
    std::size_t start = pos;
    unsigned octet = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      octet = octet * 10 + static_cast<unsigned>(text[pos] - '0');
      if (pos - start >= 3 || octet > 255) fail(text, start, "IPv4 octet out of range");
      ++pos;
    }
    if (pos == start) fail(text, pos, "expected decimal IPv4 octet");
    if (pos - start > 1 && text[start] == '0') fail(text, start, "leading zero in IPv4 octet");
    value = (value << 8) | octet;
  }
  if (pos != text.size()) fail(text, pos, "trailing characters after IPv4 tail");
  return value;
}

}  // namespace

Address128 parse_address(std::string_view text) {
  if (text.empty()) fail(text, 0, "empty string");

  std::array<std::uint16_t, 8> groups{};
  int count = 0;
  int gap_at = -1;  // index in `groups` where "::" was seen
  std::size_t pos = 0;

  if (text.starts_with("::")) {
    gap_at = 0;
    pos = 2;
  } else if (text[0] == ':') {
    fail(text, 0, "leading single ':'");
  }

  while (pos < text.size()) {
    // A '.' before the next ':' means the remainder is an IPv4 tail.
    std::size_t next_colon = text.find(':', pos);
    std::size_t next_dot = text.find('.', pos);
    if (next_dot != std::string_view::npos && next_dot < next_colon) {
      if (next_colon != std::string_view::npos) fail(text, next_colon, "':' after IPv4 tail");
      if (count > 6) fail(text, pos, "too many groups before IPv4 tail");
      std::uint32_t v4 = parse_ipv4_tail(text, pos);
      groups[count++] = static_cast<std::uint16_t>(v4 >> 16);
      groups[count++] = static_cast<std::uint16_t>(v4 & 0xFFFF);
      pos = text.size();
      break;
    }

    std::size_t start = pos;
    unsigned value = 0;
    while (pos < text.size() && hex_value(text[pos]) >= 0) {
      if (pos - start == 4) fail(text, pos, "group longer than 4 hex digits");
      value = (value << 4) | static_cast<unsigned>(hex_value(text[pos]));
      ++pos;
    }
    if (pos == start) fail(text, pos, "expected hex digit");
    if (count == 8) fail(text, start, "more than 8 groups");
    groups[count++] = static_cast<std::uint16_t>(value);

    if (pos == text.size()) break;
    if (text[pos] != ':') fail(text, pos, "unexpected character");
    ++pos;
    if (pos < text.size() && text[pos] == ':') {
      if (gap_at >= 0) fail(text, pos - 1, "second '::'");
      gap_at = count;
      ++pos;
    } else if (pos == text.size()) {
      fail(text, pos - 1, "trailing single ':'");
    }
  }

  if (gap_at >= 0) {
    if (count > 7) fail(text, 0, "'::' must stand for at least one zero group");
    int tail = count - gap_at;
    std::array<std::uint16_t, 8> full{};
    for (int i = 0; i < gap_at; ++i) full[i] = groups[i];
    for (int i = 0; i < tail; ++i) full[8 - tail + i] = groups[gap_at + i];
    groups = full;
  } else if (count != 8) {
    fail(text, text.size(), "expected 8 groups");
  }

  Address128 out;
  for (int i = 0; i < 4; ++i) out.hi = (out.hi << 16) | groups[i];
  for (int i = 4; i < 8; ++i) out.lo = (out.lo << 16) | groups[i];
  return out;
}

std::string format_address(const Address128& addr) {
  std::array<std::uint16_t, 8> g{};
  for (int i = 0; i < 4; ++i) {
    g[i] = static_cast<std::uint16_t>(addr.hi >> (16 * (3 - i)));
    g[4 + i] = static_cast<std::uint16_t>(addr.lo >> (16 * (3 - i)));
  }

  if (addr.hi == 0 && (addr.lo >> 32) == 0xFFFF) {
    return fmt::format("::ffff:{}.{}.{}.{}", addr.octet(12), addr.octet(13), addr.octet(14),
                       addr.octet(15));
  }

  // Longest run of zero groups, length >= 2, first one on ties.
  int best_start = -1;
  int best_len = 0;
  for (int i = 0; i < 8;) {
    if (g[i] != 0) {
      ++i;
      continue;
    }
    int j = i;
    while (j < 8 && g[j] == 0) ++j;
    if (j - i > best_len) {
      best_len = j - i;
      best_start = i;
    }
    i = j;
  }
  if (best_len < 2) best_start = -1;

  std::string out;
  out.reserve(39);
  for (int i = 0; i < 8; ++i) {
    if (i == best_start) {
      out += "::";
      i += best_len - 1;
      continue;
    }
    if (!out.empty() && out.back() != ':') out += ':';
    fmt::format_to(std::back_inserter(out), "{:x}", g[i]);
  }
  return out;
}

Address128 mask_address(const Address128& addr, int length) {
  if (length < 0 || length > 128) throw ContractViolation(fmt::format("prefix length {} outside 0..128", length));
  Address128 out = addr;
  if (length <= 64) {
    out.lo = 0;
    out.hi = length == 0 ? 0 : addr.hi & (~std::uint64_t{0} << (64 - length));
  } else if (length < 128) {
    out.lo = addr.lo & (~std::uint64_t{0} << (128 - length));
  }
  return out;
}

Prefix make_prefix(const Address128& addr, int length) {
  return Prefix{mask_address(addr, length), length};
}

Prefix prefix_of(const Address128& addr, int length) {
  if (length != 56 && length != 64) {
    throw ContractViolation(fmt::format("prefix_of supports /56 and /64 only, got /{}", length));
  }
  return make_prefix(addr, length);
}

bool contains(const Prefix& prefix, const Address128& addr) noexcept {
  return mask_address(addr, prefix.length) == prefix.bits;
}

Prefix parse_prefix(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) throw ParseError(fmt::format("prefix '{}' lacks '/len'", text), text.size());
  Address128 addr = parse_address(text.substr(0, slash));
  auto len_text = text.substr(slash + 1);
  int length = -1;
  auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), length);
  if (ec != std::errc{} || ptr != len_text.data() + len_text.size() || length < 0 || length > 128) {
    throw ParseError(fmt::format("prefix '{}' has invalid length", text), slash + 1);
  }
  Prefix p = make_prefix(addr, length);
  if (p.bits != addr) throw ParseError(fmt::format("prefix '{}' has host bits set", text), slash);
  return p;
}

std::string format_prefix(const Prefix& prefix) {
  return fmt::format("{}/{}", format_address(prefix.bits), prefix.length);
}

Address128 compose(const Prefix& prefix64, Iid64 iid) {
  if (prefix64.length != 64) throw ContractViolation("compose requires a /64 prefix");
  return Address128{prefix64.bits.hi, iid.bits};
}

Mac48 mac_from_eui64(Iid64 iid) {
  if (!is_eui64(iid)) {
    throw InvalidInput(fmt::format("IID {:016x} is not EUI-64 (no ff:fe at octets 3-4)", iid.bits));
  }
  Mac48 mac;
  mac.octets = {static_cast<std::uint8_t>(iid.octet(0) ^ kUniversalLocalBit), iid.octet(1), iid.octet(2),
                iid.octet(5), iid.octet(6), iid.octet(7)};
  return mac;
}

Iid64 eui64_from_mac(const Mac48& mac) noexcept {
  const auto& m = mac.octets;
  std::uint64_t bits = std::uint64_t{static_cast<std::uint8_t>(m[0] ^ kUniversalLocalBit)} << 56 |
                       std::uint64_t{m[1]} << 48 | std::uint64_t{m[2]} << 40 | std::uint64_t{0xFF} << 32 |
                       std::uint64_t{0xFE} << 24 | std::uint64_t{m[3]} << 16 | std::uint64_t{m[4]} << 8 |
                       std::uint64_t{m[5]};
  return Iid64{bits};
}

Mac48 parse_mac(std::string_view text) {
  Mac48 mac;
  std::size_t pos = 0;
  for (int i = 0; i < 6; ++i) {
    if (i > 0) {
      if (pos >= text.size() || (text[pos] != ':' && text[pos] != '-')) {
        throw ParseError(fmt::format("invalid MAC '{}': expected separator", text), pos);
      }
      ++pos;
    }
    if (pos + 2 > text.size() || hex_value(text[pos]) < 0 || hex_value(text[pos + 1]) < 0) {
      throw ParseError(fmt::format("invalid MAC '{}': expected two hex digits", text), pos);
    }
    mac.octets[i] = static_cast<std::uint8_t>(hex_value(text[pos]) << 4 | hex_value(text[pos + 1]));
    pos += 2;
  }
  if (pos != text.size()) throw ParseError(fmt::format("invalid MAC '{}': trailing characters", text), pos);
  return mac;
}

std::string format_mac(const Mac48& mac) {
  const auto& m = mac.octets;
  return fmt::format("{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", m[0], m[1], m[2], m[3], m[4], m[5]);
}

Oui parse_oui(std::string_view text) {
  if (text.size() != 6) throw ParseError(fmt::format("OUI '{}' must be 6 hex digits", text), 0);
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    int h = hex_value(text[i]);
    if (h < 0) throw ParseError(fmt::format("OUI '{}' has non-hex digit", text), i);
    v = (v << 4) | static_cast<std::uint32_t>(h);
  }
  return Oui{v};
}

std::string format_oui(Oui oui) { return fmt::format("{:06x}", oui.value); }

}  // namespace eui64leak
