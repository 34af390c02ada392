#include "eui64leak/flows.hpp"

#include <istream>

#include <fmt/format.h>
#include <sodium.h>

#include "eui64leak/digest.hpp"
#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {

template <typename T>
T field(std::string_view s, std::string_view name, std::size_t line, T max_value) {
  auto v = text::parse_number<T>(s);
  if (!v || *v > max_value) {
    throw ParseError(fmt::format("line {}: invalid {} '{}'", line, name, s), line);
  }
  return *v;
}

Address128 address_field(std::string_view s, std::string_view name, std::size_t line) {
  try {
    return parse_address(s);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("line {}: {} field: {}", line, name, e.what()), line);
  }
}

}  // namespace

bool is_flow_header(std::string_view line) noexcept {
  auto first = text::trim(line.substr(0, line.find(',')));
  return !first.empty() && !text::parse_number<std::int64_t>(first);
}

std::optional<FlowRecord> parse_flow(std::string_view line, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::array<std::string_view, 9> f;
  std::size_t n = text::split_plain(line, ',', f.data(), f.size());
  if (n != 9) {
    throw ParseError(fmt::format("line {}: expected 9 fields, got {}", line_number, n > 9 ? "more" : std::to_string(n)),
                     line_number);
  }
  // The study is IPv6-only; IPv4 endpoints are skipped, not errors.
  if (f[1].find(':') == std::string_view::npos || f[2].find(':') == std::string_view::npos) return std::nullopt;

  FlowRecord r;
  auto ts = text::parse_number<std::int64_t>(f[0]);
  if (!ts) throw ParseError(fmt::format("line {}: invalid timestamp '{}'", line_number, f[0]), line_number);
  r.timestamp = *ts;
  r.src = address_field(f[1], "src", line_number);
  r.dst = address_field(f[2], "dst", line_number);
  r.protocol = static_cast<std::uint8_t>(field<unsigned>(f[3], "protocol", line_number, 255));
  r.src_port = static_cast<std::uint16_t>(field<unsigned>(f[4], "src_port", line_number, 65535));
  r.dst_port = static_cast<std::uint16_t>(field<unsigned>(f[5], "dst_port", line_number, 65535));
  r.bytes = field<std::uint64_t>(f[6], "bytes", line_number, UINT64_MAX);
  r.packets = field<std::uint64_t>(f[7], "packets", line_number, UINT64_MAX);
  r.sampling_rate = field<std::uint32_t>(f[8], "sampling_rate", line_number, UINT32_MAX);
  if (r.sampling_rate == 0) throw ParseError(fmt::format("line {}: sampling_rate must be >= 1", line_number), line_number);
  if (r.bytes > 0 && r.packets == 0) {
    throw ParseError(fmt::format("line {}: bytes without packets", line_number), line_number);
  }
  return r;
}

void append_flow(std::string& out, const FlowRecord& r) {
  fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{},{},{}\n", r.timestamp, format_address(r.src),
                 format_address(r.dst), r.protocol, r.src_port, r.dst_port, r.bytes, r.packets, r.sampling_rate);
}

std::string format_flow(const FlowRecord& r) {
  std::string out;
  append_flow(out, r);
  out.pop_back();
  return out;
}

std::optional<FlowRecord> FlowReader::next() {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (text::trim(buf_).empty()) continue;
    if (line_ == 1 && is_flow_header(buf_)) continue;
    try {
      auto r = parse_flow(buf_, line_);
      if (r) return r;
      ++skipped_;
    } catch (const ParseError&) {
      ++malformed_;
    }
  }
  return std::nullopt;
}

AnonymizationKey AnonymizationKey::from_hex(std::string_view hex) {
  hex = text::trim(hex);
  if (hex.size() != 32) throw InvalidInput("anonymization key must be 32 hex digits");
  std::array<std::uint8_t, 16> bytes{};
  for (std::size_t i = 0; i < 16; ++i) {
    unsigned byte = 0;
    for (char c : hex.substr(2 * i, 2)) {
      int h = -1;
      if (c >= '0' && c <= '9') h = c - '0';
      else if (c >= 'a' && c <= 'f') h = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') h = c - 'A' + 10;
      if (h < 0) throw InvalidInput("anonymization key must be 32 hex digits");
      byte = byte << 4 | static_cast<unsigned>(h);
    }
    bytes[i] = static_cast<std::uint8_t>(byte);
  }
  return AnonymizationKey(bytes);
}

std::string AnonymizationKey::fingerprint() const {
  std::string_view raw(reinterpret_cast<const char*>(bytes_.data()), bytes_.size());
  return digest_bytes(raw).substr(0, 16);
}

AnonymizedAddress anonymize(const Address128& addr, const AnonymizationKey& key) noexcept {
  static_assert(crypto_shorthash_KEYBYTES == 16 && crypto_shorthash_BYTES == 8);
  std::array<unsigned char, 7> in{};
  for (int i = 0; i < 7; ++i) in[i] = addr.octet(i);
  std::array<unsigned char, 8> out{};
  crypto_shorthash(out.data(), in.data(), in.size(), key.bytes().data());
  std::uint64_t token = 0;
  for (int i = 0; i < 7; ++i) token = token << 8 | out[i];
  return AnonymizedAddress{token, addr.octet(7), iid_of(addr)};
}

AnonymizedAddress passthrough(const Address128& addr) noexcept {
  return AnonymizedAddress{addr.hi >> 8, addr.octet(7), iid_of(addr)};
}

std::optional<AnonymizeSide> parse_anonymize_side(std::string_view s) noexcept {
  if (s == "none") return AnonymizeSide::None;
  if (s == "src" || s == "source") return AnonymizeSide::Src;
  if (s == "dst" || s == "destination") return AnonymizeSide::Dst;
  if (s == "both") return AnonymizeSide::Both;
  return std::nullopt;
}

std::string_view to_string(AnonymizeSide s) noexcept {
  switch (s) {
    case AnonymizeSide::None: return "none";
    case AnonymizeSide::Src: return "src";
    case AnonymizeSide::Dst: return "dst";
    case AnonymizeSide::Both: return "both";
  }
  return "src";
}

}  // namespace eui64leak
