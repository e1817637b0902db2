#include "sentrec/templates.hpp"

#include <algorithm>
#include <unordered_set>

#include "sentrec/errors.hpp"
#include "sentrec/text.hpp"

namespace sentrec::templates {

namespace {

std::string join_phrases(const std::vector<std::string>& phrases) {
  return text::join(phrases, " and ");
}

// Split a run of words on standalone "and" separators and collect the
// phrases in between.
void collect_phrases(const std::vector<std::string>& ws, size_t begin, size_t end,
                     std::vector<std::string>* out) {
  std::vector<std::string> cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out->push_back(text::join(cur, " "));
      cur.clear();
    }
  };
  for (size_t i = begin; i < end && i < ws.size(); ++i) {
    if (ws[i] == "and") {
      flush();
    } else {
      cur.push_back(ws[i]);
    }
  }
  flush();
}

void dedupe_normalized(std::vector<std::string>* phrases) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> kept;
  for (std::string& p : *phrases) {
    if (seen.insert(text::normalize_phrase(p)).second) kept.push_back(std::move(p));
  }
  *phrases = std::move(kept);
}

constexpr std::string_view kReviewFrame =
    "Sharing a few quick thoughts after spending quite some time with this one overall.";
constexpr std::string_view kReviewSuffix = "That just about sums it up.";

}  // namespace

std::string render_explanation(const FeatureSet& features) {
  if (features.empty()) {
    throw ConfigError("render_explanation: feature set has no positive or negative phrases");
  }
  std::string out = "user";
  if (!features.positives.empty()) {
    out += " likes " + join_phrases(features.positives);
    if (!features.negatives.empty()) out += " but";
  }
  if (!features.negatives.empty()) {
    out += " dislikes " + join_phrases(features.negatives);
  }
  return out;
}

std::string render_review(const FeatureSet& features) {
  if (features.empty()) {
    throw ConfigError("render_review: feature set has no positive or negative phrases");
  }
  std::string out(kReviewFrame);
  if (!features.positives.empty()) {
    out += " I liked " + join_phrases(features.positives) + ".";
  }
  if (!features.negatives.empty()) {
    out += " I disliked " + join_phrases(features.negatives) + ".";
  }
  out += " ";
  out += kReviewSuffix;
  return out;
}

FeatureSet parse_explanation(std::string_view explanation) {
  const std::vector<std::string> ws = text::tokens(explanation);
  FeatureSet fs;

  // Word-level scan: "likes" opens the positive span, "dislikes" the negative
  // one; "but" (and "user") close the current span. Matching on whole words
  // avoids the "likes"-inside-"dislikes" substring trap.
  size_t likes_at = ws.size(), dislikes_at = ws.size();
  for (size_t i = 0; i < ws.size(); ++i) {
    if (ws[i] == "likes" && likes_at == ws.size()) likes_at = i;
    if (ws[i] == "dislikes" && dislikes_at == ws.size()) dislikes_at = i;
  }
  auto span_end = [&](size_t from) {
    for (size_t i = from; i < ws.size(); ++i) {
      if (ws[i] == "but" || ws[i] == "likes" || ws[i] == "dislikes" || ws[i] == "user") return i;
    }
    return ws.size();
  };
  if (likes_at < ws.size()) collect_phrases(ws, likes_at + 1, span_end(likes_at + 1), &fs.positives);
  if (dislikes_at < ws.size()) collect_phrases(ws, dislikes_at + 1, span_end(dislikes_at + 1), &fs.negatives);
  dedupe_normalized(&fs.positives);
  dedupe_normalized(&fs.negatives);
  return fs;
}

std::optional<FeatureSet> parse_review(std::string_view review) {
  // Sentence-level scan for "I liked ..." / "I disliked ...". Spans run to the
  // next period.
  const std::string body(review);
  auto grab = [&](std::string_view marker, std::vector<std::string>* out) -> bool {
    const size_t at = body.find(marker);
    if (at == std::string::npos) return false;
    const size_t from = at + marker.size();
    size_t to = body.find('.', from);
    if (to == std::string::npos) to = body.size();
    const std::vector<std::string> ws = text::words(std::string_view(body).substr(from, to - from));
    collect_phrases(ws, 0, ws.size(), out);
    return true;
  };

  FeatureSet fs;
  const bool saw_pos = grab("I liked ", &fs.positives);
  const bool saw_neg = grab("I disliked ", &fs.negatives);
  if (!saw_pos && !saw_neg) return std::nullopt;
  dedupe_normalized(&fs.positives);
  dedupe_normalized(&fs.negatives);
  if (fs.empty()) return std::nullopt;
  return fs;
}

}  // namespace sentrec::templates
