#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace leqmod::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

// Strict parsers: the whole (trimmed) field must be consumed. Throw
// ConfigError naming `what` on failure.
double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);
std::vector<double> parse_double_list(std::string_view s, std::string_view what);

/// 64-bit FNV-1a, used for cohort provenance hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

} // namespace leqmod::text
