#pragma once

// Flow records, the flow CSV format, and subscriber-prefix anonymization.
//
// CSV schema, one record per line:
//   timestamp,src,dst,protocol,src_port,dst_port,bytes,packets,sampling_rate
// A header line is recognized by a non-numeric first field.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "eui64leak/address.hpp"

namespace eui64leak {

struct FlowRecord {
  std::int64_t timestamp = 0;
  Address128 src;
  Address128 dst;
  std::uint8_t protocol = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;
  std::uint32_t sampling_rate = 1;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

bool is_flow_header(std::string_view line) noexcept;

// Parses one CSV line. Returns nullopt for records with a non-IPv6 endpoint
// (the caller counts those as skipped). Throws ParseError carrying
// `line_number` on arity or field errors.
std::optional<FlowRecord> parse_flow(std::string_view line, std::size_t line_number = 0);

std::string format_flow(const FlowRecord& flow);
// Appends one CSV line, newline included.
void append_flow(std::string& out, const FlowRecord& flow);

inline constexpr std::string_view kFlowHeader =
    "timestamp,src,dst,protocol,src_port,dst_port,bytes,packets,sampling_rate";

// Sequential reader used by tests and small tools; the analysis pipeline
// parses in parallel chunks instead.
class FlowReader {
 public:
  explicit FlowReader(std::istream& in) : in_(in) {}

  // Next valid IPv6 record; malformed lines are counted and skipped.
  std::optional<FlowRecord> next();

  std::size_t line_number() const noexcept { return line_; }
  std::size_t skipped_non_ipv6() const noexcept { return skipped_; }
  std::size_t malformed() const noexcept { return malformed_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
  std::size_t skipped_ = 0;
  std::size_t malformed_ = 0;
};

class AnonymizationKey {
 public:
  AnonymizationKey() = default;
  explicit AnonymizationKey(const std::array<std::uint8_t, 16>& bytes) : bytes_(bytes) {}

  // 32 hex digits.
  static AnonymizationKey from_hex(std::string_view hex);

  const std::array<std::uint8_t, 16>& bytes() const noexcept { return bytes_; }
  // Short BLAKE2b digest of the key for manifests; never the key itself.
  std::string fingerprint() const;

 private:
  std::array<std::uint8_t, 16> bytes_{};
};

struct AnonymizedAddress {
  std::uint64_t prefix_token = 0;  // 56 significant bits
  std::uint8_t subnet_id = 0;      // address bits 56..63
  Iid64 iid;

  // Drop-in address: token in the /56 slot, subnet and IID verbatim.
  Address128 to_address() const noexcept {
    return Address128{(prefix_token << 8) | subnet_id, iid.bits};
  }

  friend bool operator==(const AnonymizedAddress&, const AnonymizedAddress&) = default;
};

inline constexpr std::uint64_t kTokenMask = (std::uint64_t{1} << 56) - 1;

// Keyed SipHash-2-4 of the top 56 address bits, truncated to 56 bits.
AnonymizedAddress anonymize(const Address128& addr, const AnonymizationKey& key) noexcept;
// Identity mapping: token is the raw top 56 bits.
AnonymizedAddress passthrough(const Address128& addr) noexcept;

enum class AnonymizeSide { None, Src, Dst, Both };
std::optional<AnonymizeSide> parse_anonymize_side(std::string_view s) noexcept;
std::string_view to_string(AnonymizeSide s) noexcept;

inline constexpr std::string_view kPrfName = "siphash-2-4/libsodium-crypto_shorthash/trunc56";

}  // namespace eui64leak
