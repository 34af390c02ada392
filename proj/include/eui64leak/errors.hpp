#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace eui64leak {

// Malformed textual input. `position` is a 0-based character offset for
// single-token parsers and a 1-based line number for line-oriented readers.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// A caller broke an operation's precondition (e.g. unsupported prefix length).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input value outside the domain of an operation (e.g. non-EUI-64 IID).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration validation failure; carries every violation found, each
// prefixed with its key path ("simulation.households: ...").
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace eui64leak
