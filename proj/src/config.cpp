#include "sentrec/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sentrec/errors.hpp"
#include "sentrec/text.hpp"

namespace sentrec::config {
namespace {

bool valid_env_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

std::string interpolate(const std::string& value, const std::string& origin) {
  std::string out;
  out.reserve(value.size());
  size_t i = 0;
  while (i < value.size()) {
    if (value[i] == '$' && i + 1 < value.size() && value[i + 1] == '{') {
      size_t close = value.find('}', i + 2);
      if (close == std::string::npos)
        throw ConfigError(origin + ": unterminated ${...} in value '" + value + "'");
      std::string name = value.substr(i + 2, close - i - 2);
      if (name.empty())
        throw ConfigError(origin + ": empty environment reference ${}");
      for (char c : name) {
        if (!valid_env_char(c))
          throw ConfigError(origin + ": invalid environment variable name '" + name + "'");
      }
      const char* env = std::getenv(name.c_str());
      if (env == nullptr)
        throw ConfigError(origin + ": environment variable '" + name + "' is not set");
      out += env;
      i = close + 1;
    } else {
      out += value[i];
      ++i;
    }
  }
  return out;
}

Map parse_text(const std::string& text, const std::string& origin) {
  Map out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = text::trim(t.substr(0, eq));
    std::string value = text::trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = interpolate(value, origin + ":" + std::to_string(lineno));
  }
  return out;
}

Map parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

bool has(const Map& m, const std::string& key) { return m.find(key) != m.end(); }

std::string get_string(const Map& m, const std::string& key, const std::string& fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

bool get_bool(const Map& m, const std::string& key, bool fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

int64_t get_int(const Map& m, const std::string& key, int64_t fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    size_t pos = 0;
    int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
  }
}

uint64_t get_uint(const Map& m, const std::string& key, uint64_t fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    size_t pos = 0;
    if (!it->second.empty() && it->second[0] == '-') throw std::invalid_argument("negative");
    uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" +
                      it->second + "'");
  }
}

double get_double(const Map& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
  }
}

}  // namespace sentrec::config
