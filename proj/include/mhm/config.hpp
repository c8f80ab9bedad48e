#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mhm {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;  // 0 for entries that did not come from a file
};

/// Parses UTF-8 `key = value` lines. Blank lines and lines starting with '#'
/// are skipped; anything else without '=' is an error naming the line.
std::vector<ConfigEntry> parse_config(std::string_view text);
std::vector<ConfigEntry> read_config(const std::filesystem::path& path);

// Typed value parsing; errors mention the key and line.
double parse_double(const ConfigEntry& e);
std::size_t parse_size(const ConfigEntry& e);
std::uint64_t parse_u64(const ConfigEntry& e);
bool parse_bool(const ConfigEntry& e);
std::vector<double> parse_double_list(const ConfigEntry& e);
std::vector<std::size_t> parse_size_list(const ConfigEntry& e);

std::string where(const ConfigEntry& e);

/// Shortest text that parses back to exactly `v`.
std::string exact(double v);

}  // namespace mhm
