#include "mhm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mhm {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad_value(const ConfigEntry& e, const char* expected) {
    throw ConfigError(where(e) + ": '" + e.key + "' expects " + expected + ", got '" + e.value + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

std::string exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string where(const ConfigEntry& e) {
    return e.line ? "line " + std::to_string(e.line) : std::string("override");
}

std::vector<ConfigEntry> parse_config(std::string_view text) {
    std::vector<ConfigEntry> out;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        const std::string line = trim(raw);
        if (!line.empty() && line[0] != '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
            }
            ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
            if (e.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            out.push_back(std::move(e));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::vector<ConfigEntry> read_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

double parse_double(const ConfigEntry& e) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) bad_value(e, "a number");
        return v;
    } catch (const std::logic_error&) {
        bad_value(e, "a number");
    }
}

std::uint64_t parse_u64(const ConfigEntry& e) {
    std::uint64_t v = 0;
    const auto* end = e.value.data() + e.value.size();
    const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || ptr != end) bad_value(e, "a non-negative integer");
    return v;
}

std::size_t parse_size(const ConfigEntry& e) { return static_cast<std::size_t>(parse_u64(e)); }

bool parse_bool(const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    bad_value(e, "true or false");
}

std::vector<double> parse_double_list(const ConfigEntry& e) {
    std::vector<double> out;
    for (const auto& item : split_list(e.value)) out.push_back(parse_double({e.key, item, e.line}));
    if (out.empty()) bad_value(e, "a comma-separated list of numbers");
    return out;
}

std::vector<std::size_t> parse_size_list(const ConfigEntry& e) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(e.value)) out.push_back(parse_size({e.key, item, e.line}));
    if (out.empty()) bad_value(e, "a comma-separated list of integers");
    return out;
}

}  // namespace mhm
