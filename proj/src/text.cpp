#include "eui64leak/text.hpp"

namespace eui64leak::text {

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool field_was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && trim(cur).empty()) {
      cur.clear();
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      fields.push_back(field_was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      field_was_quoted = false;
    } else if (c != '\r' && c != '\n') {
      cur += c;
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(field_was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

std::size_t split_plain(std::string_view line, char sep, std::string_view* out, std::size_t max_fields) {
  std::size_t n = 0;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(sep, start);
    if (n == max_fields) return max_fields + 1;  // too many
    out[n++] = line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (end == std::string_view::npos) return n;
    start = end + 1;
  }
}

std::string csv_field(std::string_view s) {
  bool needs = s.find_first_of(",\"") != std::string_view::npos ||
               (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

bool is_comment_or_blank(std::string_view line) noexcept {
  auto t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace eui64leak::text
