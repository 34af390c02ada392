#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eui64leak {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInput = 2,
  kExitVerification = 3,
};

inline constexpr const char* kKeyEnvVar = "EUI64LEAK_KEY";

// Entry point of the eui64leak tool: simulate | analyze | report | verify.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eui64leak
