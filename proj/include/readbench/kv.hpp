#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace readbench {

/// "key = value" lines in file order; blank lines and '#' comments skipped.
/// Throws ConfigError naming the line on malformed input.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in);

/// Byte counts with optional binary suffix: 4096, 4K, 4KiB, 64M, 1G, 2T.
std::uint64_t parse_size(std::string_view text);

/// Shortest exact binary-suffixed spelling: 4096 -> "4K", 3000 -> "3000".
std::string format_size(std::uint64_t bytes);

double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

/// Comma-separated sizes.
std::vector<std::uint64_t> parse_size_list(std::string_view text);

}  // namespace readbench
