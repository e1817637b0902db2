#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sentrec::text {

std::string lower(std::string_view s);

// Strip leading and trailing whitespace.
std::string trim(std::string_view s);

// Trim and squeeze every whitespace run to a single space.
std::string collapse_ws(std::string_view s);

// Whitespace-delimited words, verbatim.
std::vector<std::string> words(std::string_view s);

int word_count(std::string_view s);

// Metric/embedding tokenization: lowercase, split on non-alphanumeric,
// drop empties.
std::vector<std::string> tokens(std::string_view s);

// Keep at most max_words whitespace-delimited words.
std::string truncate_words(std::string_view s, int max_words);

bool contains_ci(std::string_view haystack, std::string_view needle);

// True when `word` appears as a whole token of `s` (both lowercased).
bool contains_token(std::string_view s, std::string_view word);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Canonical form used when feature phrases are counted or compared:
// lowercase plus whitespace collapse.
std::string normalize_phrase(std::string_view s);

}  // namespace sentrec::text
