#pragma once

// Small text helpers shared by the line-oriented readers.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eui64leak::text {

std::string_view trim(std::string_view s) noexcept;

// Splits one CSV line on ','. Fields may be wrapped in double quotes, in which
// case commas inside are literal and "" is an escaped quote. Returns nullopt
// on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line);

// Fast split without quote handling; views point into `line`.
std::size_t split_plain(std::string_view line, char sep, std::string_view* out, std::size_t max_fields);

// Quotes a field if it contains ',', '"' or leading/trailing space.
std::string csv_field(std::string_view s);

template <typename T>
std::optional<T> parse_number(std::string_view s) noexcept {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// True for blank lines and lines whose first non-space char is '#'.
bool is_comment_or_blank(std::string_view line) noexcept;

}  // namespace eui64leak::text
