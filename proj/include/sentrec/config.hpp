#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace sentrec::config {

// Flat key/value settings parsed from `key = value` files. Lines starting
// with '#' (after leading whitespace) and blank lines are skipped; values may
// reference environment variables as ${NAME}, resolved at parse time.
using Map = std::map<std::string, std::string>;

Map parse_text(const std::string& text, const std::string& origin);
Map parse_file(const std::string& path);

// ${NAME} -> getenv("NAME"); unset variables are a ConfigError.
std::string interpolate(const std::string& value, const std::string& origin);

// Typed getters. Missing keys fall back to the default; malformed values are
// a ConfigError naming the key.
std::string get_string(const Map& m, const std::string& key, const std::string& fallback);
bool get_bool(const Map& m, const std::string& key, bool fallback);
int64_t get_int(const Map& m, const std::string& key, int64_t fallback);
uint64_t get_uint(const Map& m, const std::string& key, uint64_t fallback);
double get_double(const Map& m, const std::string& key, double fallback);
bool has(const Map& m, const std::string& key);

}  // namespace sentrec::config
