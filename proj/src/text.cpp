#include "sentrec/text.hpp"

#include <algorithm>
#include <cctype>

namespace sentrec::text {

namespace {
inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}
inline bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}
inline char to_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}
}  // namespace

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), to_lower);
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_gap = true;  // leading whitespace is dropped
  for (char c : s) {
    if (is_space(c)) {
      in_gap = true;
    } else {
      if (in_gap && !out.empty()) out.push_back(' ');
      in_gap = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int word_count(std::string_view s) {
  int n = 0;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size()) break;
    ++n;
    while (i < s.size() && !is_space(s[i])) ++i;
  }
  return n;
}

std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_alnum(c)) {
      cur.push_back(to_lower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string truncate_words(std::string_view s, int max_words) {
  if (max_words <= 0) return "";
  const std::vector<std::string> ws = words(s);
  if (static_cast<int>(ws.size()) <= max_words) return std::string(collapse_ws(s));
  std::vector<std::string> kept(ws.begin(), ws.begin() + max_words);
  return join(kept, " ");
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  const std::string h = lower(haystack);
  const std::string n = lower(needle);
  return h.find(n) != std::string::npos;
}

bool contains_token(std::string_view s, std::string_view word) {
  const std::string w = lower(word);
  for (const std::string& t : tokens(s)) {
    if (t == w) return true;
  }
  return false;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string normalize_phrase(std::string_view s) {
  return lower(collapse_ws(s));
}

}  // namespace sentrec::text
