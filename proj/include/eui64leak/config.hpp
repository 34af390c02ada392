#pragma once

// Sectioned key=value text:
//
//   # comment
//   [section]
//   key = value
//
// Keys before any section header belong to section "".

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eui64leak {

class KeyValueFile {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line = 0;
  };

  // Throws ParseError (with line number) on malformed lines.
  static KeyValueFile parse(std::istream& in);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  // Distinct section names in order of first appearance.
  std::vector<std::string> sections() const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace eui64leak
