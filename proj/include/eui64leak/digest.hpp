#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace eui64leak {

inline constexpr std::string_view kDigestName = "blake2b-256";

// Hex BLAKE2b-256 digests.
std::string digest_bytes(std::string_view data);
std::string digest_file(const std::filesystem::path& path);

}  // namespace eui64leak
