#include "eui64leak/config.hpp"

#include <algorithm>
#include <istream>

#include <fmt/format.h>

#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

KeyValueFile KeyValueFile::parse(std::istream& in) {
  KeyValueFile f;
  std::string section;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = text::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ParseError(fmt::format("config line {}: bad section header", line), line);
      section = std::string(text::trim(s.substr(1, s.size() - 2)));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(fmt::format("config line {}: expected key = value", line), line);
    auto key = text::trim(s.substr(0, eq));
    if (key.empty()) throw ParseError(fmt::format("config line {}: empty key", line), line);
    f.entries_.push_back(Entry{section, std::string(key), std::string(text::trim(s.substr(eq + 1))), line});
  }
  return f;
}

std::vector<std::string> KeyValueFile::sections() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(out.begin(), out.end(), e.section) == out.end()) out.push_back(e.section);
  }
  return out;
}

}  // namespace eui64leak
