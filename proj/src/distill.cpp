#include "sentrec/distill.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

#include "sentrec/errors.hpp"
#include "sentrec/templates.hpp"
#include "sentrec/text.hpp"

#include "json.hpp"

namespace sentrec::distill {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- prompt templates ----------------------------------------------------------

namespace {

struct Template {
  const char* system;
  const char* assistant;
  const char* user;
};

constexpr Template kSummarize{
    "You are a smart recommender system.",
    "rating: <rating>/<max_rating>, review: <review_text>",
    "Please explain within <n> words based on the rating and review of what the user likes "
    "or dislikes about the item,",
};

constexpr Template kExtract{
    "You are a helpful assistant.",
    "text: <text>",
    "Please extract the features that the user likes or dislikes about the item from the "
    "text. The features must be included in the original text. Return the result in JSON "
    "format with the following structure: {'likes': ['feature_1,' 'feature_2'], 'dislikes': "
    "['feature_3', 'feature_4']}. Do not include any other sentences.",
};

constexpr Template kAuditSummary{
    "",
    "",
    R"(As a customer engagement team leader at Amazon, your task involves evaluating a summary written by a specialist about why a certain purchase was made. You will analyze the summary based on the provided customer review and rating, using these criteria:

1. hallucination: Answer "Hallucination" if the summary includes any unrelated features not mentioned by the customer review; otherwise, "Factual".
2. hallucination_reason: Provide a concise explanation for your assessment of the summary’s hallucination.
3. context_positive: Answer "Hallucination" or "Correct". "Hallucination" if the summary includes any feature mentioned as a negative feature in the customer review as positive; otherwise, "Correct".
4. context_positive_reason: Provide a concise explanation for your assessment of the summary's hallucination.
5. context_negative: Answer "Hallucination" or "Correct". "Hallucination" if the summary includes any feature mentioned as a positive feature in the customer review as negative; otherwise, "Correct".
6. context_negative_reason: Provide a concise explanation for your assessment of the summary's hallucination.

Please respond using a valid json format, for example: {
"hallucination": "Factual",
"hallucination_reason": "...",
"context_positive": "Correct",
"context_positive_reason": "...",
"context_negative": "Correct",
"context_negative_reason": "...",
}

Now, please evaluate the following summary based on the above criteria:
Customer review: <review_text>.
Rating: <rating> / <max_rating>.
Specialist's summary of the review: <explanation_text>.

Assessment:)",
};

constexpr Template kAuditFeatures{
    "",
    "",
    R"(As a customer engagement team leader at Amazon, your task involves evaluating the positive and negative feature lists extracted from the explanation text about a user's experience after purchasing a product. You will check the positive and negative feature lists based on the provided explanation text, using these criteria:

1. hallucination_positive: Answer "Hallucination" if the positive feature list includes any unrelated features not mentioned by the explanation text; otherwise, "Factual".
2. hallucination_positive_reason: Provide a concise explanation for your assessment of the hallucination in the positive feature list.
3. completness_positive: "Yes" or "No". "Yes" if the positive feature list successfully includes all the positive features mentioned in the explanation text; otherwise, "No".
4. completness_positive_reason: Provide a concise explanation for your assessment of the positive feature list's completeness.
5. hallucination_negative: Answer "Hallucination" if the negative feature list includes any unrelated features not mentioned by the explanation text; otherwise, "Factual".
6. hallucination_negative_reason: Provide a concise explanation for your assessment of the hallucination in the negative feature list.
7. completness_negative: "Yes" or "No". "Yes" if the negative feature list successfully includes all the negative features mentioned in the explanation text; otherwise, "No".
8. completness_negative_reason: Provide a concise explanation for your assessment of the negative feature list's completeness.

Please respond using a valid json format, for example: {
"hallucination_positive": "Factual",
"hallucination_positive_reason": "...",
"completness_positive": "Yes",
"completness_positive_reason": "...",
"hallucination_negative": "Factual",
"hallucination_negative_reason": "...",
"completness_negative": "Yes",
"completness_negative_reason": "...",
}

Now, please evaluate the following positive and negative feature lists based on the above criteria:
Positive feature list: <features_positive>.
Negative feature list: <features_negative>.
Explanation text: <explanation_text>.

Assessment:)",
};

const Template& pick_template(PromptId id) {
  switch (id) {
    case PromptId::Summarize: return kSummarize;
    case PromptId::ExtractFeatures: return kExtract;
    case PromptId::AuditSummary: return kAuditSummary;
    case PromptId::AuditFeatures: return kAuditFeatures;
  }
  throw Error("render_prompt: bad template id");
}

// Substitutes every <placeholder> in `tmpl`. The extraction template's JSON
// example contains literal braces/brackets but no <word> tokens other than
// the real placeholders, so a simple scan suffices.
std::string substitute(const std::string& tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '<') {
      const size_t end = tmpl.find('>', i + 1);
      if (end != std::string::npos) {
        const std::string name = tmpl.substr(i + 1, end - i - 1);
        const bool looks_like_placeholder =
            !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
              return std::islower(c) != 0 || c == '_';
            });
        if (looks_like_placeholder) {
          auto it = bindings.find(name);
          if (it == bindings.end())
            throw ConfigError("render_prompt: unbound placeholder <" + name + ">");
          out += it->second;
          i = end + 1;
          continue;
        }
      }
    }
    out += tmpl[i];
    ++i;
  }
  return out;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

Prompt render_prompt(PromptId id, const Bindings& bindings) {
  const Template& t = pick_template(id);
  return Prompt{substitute(t.system, bindings), substitute(t.assistant, bindings),
                substitute(t.user, bindings)};
}

std::string render_feature_list(const std::vector<std::string>& phrases) {
  std::string out = "[";
  for (size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) out += ", ";
    out += json(phrases[i]).dump();
  }
  out += "]";
  return out;
}

// ---- tolerant JSON -------------------------------------------------------------

namespace {

// One balanced scan from `start`; quote-aware when `track_quotes` is set.
std::optional<std::string> balanced_slice(const std::string& text, size_t start, char open,
                                          char close, bool track_quotes) {
  int depth = 0;
  char quote = 0;
  for (size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != 0) {
      if (c == '\\' && i + 1 < text.size()) {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (track_quotes && (c == '"' || c == '\'')) {
      quote = c;
    } else if (c == open) {
      ++depth;
    } else if (c == close) {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

}  // namespace

std::string extract_balanced(const std::string& text, char open, char close) {
  const size_t start = text.find(open);
  if (start == std::string::npos)
    throw ParseError(std::string("no '") + open + "' found in completion", text);
  // Strict pass first, so closers inside quoted strings do not count. An odd
  // number of quote marks (a key that lost its opening quote) desyncs that
  // scan, so fall back to a plain bracket count before giving up.
  if (std::optional<std::string> s = balanced_slice(text, start, open, close, true))
    return *s;
  if (std::optional<std::string> s = balanced_slice(text, start, open, close, false))
    return *s;
  throw ParseError(std::string("unbalanced '") + open + "' in completion", text);
}

namespace {

bool is_bare_number(const std::string& s) {
  if (s.empty()) return false;
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  bool digit = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
      digit = true;
    } else if (c != '.' && c != 'e' && c != 'E' && c != '-' && c != '+') {
      return false;
    }
  }
  return digit;
}

std::string quote_token(const std::string& token) {
  std::string out = "\"";
  for (char c : token) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string repair_json(const std::string& object_text) {
  std::string out;
  out.reserve(object_text.size() + 16);
  size_t i = 0;
  const size_t n = object_text.size();
  char quote = 0;
  while (i < n) {
    const char c = object_text[i];
    if (quote != 0) {
      if (c == '\\' && i + 1 < n) {
        out += c;
        out += object_text[i + 1];
        i += 2;
      } else if (c == quote) {
        out += '"';
        quote = 0;
        ++i;
      } else if (c == '"') {  // double quote inside a single-quoted string
        out += "\\\"";
        ++i;
      } else {
        out += c;
        ++i;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
      out += '"';
      ++i;
    } else if (c == ',') {
      size_t j = i + 1;
      while (j < n && std::isspace(static_cast<unsigned char>(object_text[j])) != 0) ++j;
      if (j < n && (object_text[j] == '}' || object_text[j] == ']')) {
        ++i;  // drop the trailing comma
      } else {
        out += c;
        ++i;
      }
    } else if (c == '{' || c == '}' || c == '[' || c == ']' || c == ':' ||
               std::isspace(static_cast<unsigned char>(c)) != 0) {
      out += c;
      ++i;
    } else {
      // Bare token (unquoted key or value, possibly with stray quote marks).
      size_t j = i;
      while (j < n && object_text[j] != ',' && object_text[j] != ':' && object_text[j] != '}' &&
             object_text[j] != ']' && object_text[j] != '\n') {
        ++j;
      }
      std::string token = object_text.substr(i, j - i);
      while (!token.empty() && (std::isspace(static_cast<unsigned char>(token.back())) != 0 ||
                                token.back() == '"' || token.back() == '\'')) {
        token.pop_back();
      }
      size_t drop = 0;
      while (drop < token.size() &&
             (std::isspace(static_cast<unsigned char>(token[drop])) != 0 || token[drop] == '"' ||
              token[drop] == '\'')) {
        ++drop;
      }
      token.erase(0, drop);
      if (token == "true" || token == "false" || token == "null" || is_bare_number(token)) {
        out += token;
      } else {
        out += quote_token(token);
      }
      i = j;
    }
  }
  return out;
}

namespace {

json parse_tolerant_object(const std::string& completion) {
  const std::string slice = extract_balanced(completion, '{', '}');
  json parsed = json::parse(slice, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  parsed = json::parse(repair_json(slice), nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  throw ParseError("completion is not a JSON object", completion);
}

std::vector<std::string> parse_string_array(const std::string& list_text,
                                            const std::string& raw) {
  const std::string slice = extract_balanced(list_text, '[', ']');
  json parsed = json::parse(slice, nullptr, false);
  if (parsed.is_discarded()) parsed = json::parse(repair_json(slice), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array())
    throw ParseError("feature list is not a JSON array", raw);
  std::vector<std::string> out;
  for (const json& item : parsed) {
    if (!item.is_string()) throw ParseError("feature list holds a non-string entry", raw);
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

// ---- rule-based client ------------------------------------------------------------

namespace {

std::string slice_between(const std::string& text, const std::string& from,
                          const std::string& to, const char* what) {
  const size_t a = text.find(from);
  if (a == std::string::npos)
    throw ClientError(std::string("rule-based client: prompt lacks ") + what);
  const size_t begin = a + from.size();
  const size_t b = text.find(to, begin);
  if (b == std::string::npos)
    throw ClientError(std::string("rule-based client: prompt lacks end of ") + what);
  return text.substr(begin, b - begin);
}

bool phrase_in_list(const std::string& phrase, const std::vector<std::string>& list) {
  const std::string norm = text::normalize_phrase(phrase);
  return std::any_of(list.begin(), list.end(), [&](const std::string& other) {
    return text::normalize_phrase(other) == norm;
  });
}

std::string rule_based_summary(const std::string& assistant_text, const std::string& user_text) {
  int cap = 15;
  const size_t at = user_text.find("within ");
  if (at != std::string::npos) cap = std::atoi(user_text.c_str() + at + 7);
  if (cap < 1) cap = 15;
  const size_t mark = assistant_text.find(", review: ");
  if (mark == std::string::npos)
    throw ClientError("rule-based client: summarization prompt lacks review text");
  const std::string review = assistant_text.substr(mark + 10);
  const std::optional<FeatureSet> parsed = templates::parse_review(review);
  if (parsed.has_value() && !parsed->empty()) return templates::render_explanation(*parsed);
  return text::truncate_words(review, static_cast<size_t>(cap));
}

std::string rule_based_extraction(const std::string& assistant_text) {
  const size_t mark = assistant_text.find("text: ");
  if (mark == std::string::npos)
    throw ClientError("rule-based client: extraction prompt lacks text");
  const FeatureSet fs = templates::parse_explanation(assistant_text.substr(mark + 6));
  ordered_json out{{"likes", fs.positives}, {"dislikes", fs.negatives}};
  return out.dump();
}

std::string rule_based_stage1(const std::string& user_text) {
  const std::string review =
      slice_between(user_text, "Customer review: ", ".\nRating: ", "the customer review");
  const std::string explanation = slice_between(
      user_text, "Specialist's summary of the review: ", ".\n\nAssessment:", "the summary");

  const FeatureSet summary_features = templates::parse_explanation(explanation);
  const std::optional<FeatureSet> review_features = templates::parse_review(review);

  bool factual = true;
  for (const std::string& phrase : summary_features.positives) {
    if (!text::contains_ci(review, phrase)) factual = false;
  }
  for (const std::string& phrase : summary_features.negatives) {
    if (!text::contains_ci(review, phrase)) factual = false;
  }
  bool context_positive = true;
  bool context_negative = true;
  if (review_features.has_value()) {
    for (const std::string& phrase : summary_features.positives) {
      if (phrase_in_list(phrase, review_features->negatives)) context_positive = false;
    }
    for (const std::string& phrase : summary_features.negatives) {
      if (phrase_in_list(phrase, review_features->positives)) context_negative = false;
    }
  }

  ordered_json out{
      {"hallucination", factual ? "Factual" : "Hallucination"},
      {"hallucination_reason",
       factual ? "Every summary feature occurs in the customer review."
               : "The summary mentions a feature absent from the customer review."},
      {"context_positive", context_positive ? "Correct" : "Hallucination"},
      {"context_positive_reason",
       context_positive ? "No negative feature of the review is presented as positive."
                        : "A negative feature of the review is presented as positive."},
      {"context_negative", context_negative ? "Correct" : "Hallucination"},
      {"context_negative_reason",
       context_negative ? "No positive feature of the review is presented as negative."
                        : "A positive feature of the review is presented as negative."},
  };
  return out.dump();
}

std::string rule_based_stage2(const std::string& user_text) {
  const std::string pos_text = slice_between(user_text, "Positive feature list: ",
                                             ".\nNegative feature list: ", "the positive list");
  const std::string neg_text = slice_between(user_text, "Negative feature list: ",
                                             ".\nExplanation text: ", "the negative list");
  const std::string explanation =
      slice_between(user_text, "Explanation text: ", ".\n\nAssessment:", "the explanation");

  const std::vector<std::string> listed_pos = parse_string_array(pos_text, user_text);
  const std::vector<std::string> listed_neg = parse_string_array(neg_text, user_text);
  const FeatureSet mentioned = templates::parse_explanation(explanation);

  auto all_in_text = [&](const std::vector<std::string>& list) {
    return std::all_of(list.begin(), list.end(), [&](const std::string& phrase) {
      return text::contains_ci(explanation, phrase);
    });
  };
  auto all_listed = [&](const std::vector<std::string>& mentioned_side,
                        const std::vector<std::string>& list) {
    return std::all_of(mentioned_side.begin(), mentioned_side.end(),
                       [&](const std::string& phrase) { return phrase_in_list(phrase, list); });
  };

  const bool factual_p = all_in_text(listed_pos);
  const bool factual_n = all_in_text(listed_neg);
  const bool complete_p = all_listed(mentioned.positives, listed_pos);
  const bool complete_n = all_listed(mentioned.negatives, listed_neg);

  ordered_json out{
      {"hallucination_positive", factual_p ? "Factual" : "Hallucination"},
      {"hallucination_positive_reason",
       factual_p ? "Every listed positive feature occurs in the explanation text."
                 : "A listed positive feature is absent from the explanation text."},
      {"completness_positive", complete_p ? "Yes" : "No"},
      {"completness_positive_reason",
       complete_p ? "The positive feature list covers all positive features of the text."
                  : "A positive feature of the text is missing from the list."},
      {"hallucination_negative", factual_n ? "Factual" : "Hallucination"},
      {"hallucination_negative_reason",
       factual_n ? "Every listed negative feature occurs in the explanation text."
                 : "A listed negative feature is absent from the explanation text."},
      {"completness_negative", complete_n ? "Yes" : "No"},
      {"completness_negative_reason",
       complete_n ? "The negative feature list covers all negative features of the text."
                  : "A negative feature of the text is missing from the list."},
  };
  return out.dump();
}

}  // namespace

std::string RuleBasedClient::complete(const std::string& /*system_text*/,
                                      const std::string& assistant_text,
                                      const std::string& user_text) {
  if (user_text.rfind("Please explain within", 0) == 0) {
    return rule_based_summary(assistant_text, user_text);
  }
  if (user_text.rfind("Please extract the features", 0) == 0) {
    return rule_based_extraction(assistant_text);
  }
  if (user_text.find("evaluating a summary written by a specialist") != std::string::npos) {
    return rule_based_stage1(user_text);
  }
  if (user_text.find("evaluating the positive and negative feature lists") != std::string::npos) {
    return rule_based_stage2(user_text);
  }
  throw ClientError("rule-based client: unrecognized prompt");
}

// ---- pipeline steps -----------------------------------------------------------------

SummaryResult summarize_review(ChatClient& client, const Interaction& interaction, int word_cap) {
  if (word_cap < 1) throw ConfigError("summarize_review: word_cap must be >= 1");
  const Prompt p = render_prompt(PromptId::Summarize,
                                 {{"rating", format_number(interaction.rating)},
                                  {"max_rating", std::to_string(interaction.max_rating)},
                                  {"review_text", interaction.review_text},
                                  {"n", std::to_string(word_cap)}});
  auto attempt = [&]() -> std::string {
    try {
      return text::collapse_ws(client.complete(p.system, p.assistant, p.user));
    } catch (const ClientError& e) {
      throw ClientError(std::string("summarize: ") + e.what(), interaction.key());
    }
  };
  SummaryResult result;
  result.text = attempt();
  if (text::word_count(result.text) > word_cap) {
    result.text = attempt();
    if (text::word_count(result.text) > word_cap) {
      result.text = text::truncate_words(result.text, static_cast<size_t>(word_cap));
      result.truncated = true;
    }
  }
  return result;
}

FeatureSet parse_feature_completion(const std::string& completion) {
  const json parsed = parse_tolerant_object(completion);
  if (!parsed.contains("likes") || !parsed.contains("dislikes"))
    throw ParseError("completion lacks likes/dislikes keys", completion);
  FeatureSet fs;
  auto read_side = [&](const char* key, std::vector<std::string>* side) {
    const json& arr = parsed.at(key);
    if (!arr.is_array())
      throw ParseError(std::string("'") + key + "' is not an array", completion);
    for (const json& item : arr) {
      if (!item.is_string())
        throw ParseError(std::string("'") + key + "' holds a non-string entry", completion);
      side->push_back(item.get<std::string>());
    }
  };
  read_side("likes", &fs.positives);
  read_side("dislikes", &fs.negatives);
  return fs;
}

ExtractionResult extract_features(ChatClient& client, const std::string& text_in) {
  if (text_in.empty()) throw ConfigError("extract_features: empty text");
  const Prompt p = render_prompt(PromptId::ExtractFeatures, {{"text", text_in}});
  auto attempt = [&] { return client.complete(p.system, p.assistant, p.user); };

  std::string completion = attempt();
  FeatureSet raw;
  try {
    raw = parse_feature_completion(completion);
  } catch (const ParseError&) {
    completion = attempt();
    try {
      raw = parse_feature_completion(completion);
    } catch (const ParseError&) {
      throw ParseError("extract_features: unparsable completion after retry", completion);
    }
  }

  ExtractionResult result;
  auto filter_side = [&](const std::vector<std::string>& in, std::vector<std::string>* out) {
    std::vector<std::string> seen;
    for (const std::string& phrase_raw : in) {
      const std::string phrase = text::collapse_ws(phrase_raw);
      const std::string norm = text::normalize_phrase(phrase);
      if (norm.empty()) {
        result.dropped.push_back(phrase_raw);
        continue;
      }
      if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;  // duplicate
      if (!text::contains_ci(text_in, phrase)) {
        result.dropped.push_back(phrase);
        continue;
      }
      seen.push_back(norm);
      out->push_back(phrase);
    }
  };
  filter_side(raw.positives, &result.features.positives);
  filter_side(raw.negatives, &result.features.negatives);
  return result;
}

// ---- quality audit --------------------------------------------------------------------

namespace {

std::string lower_trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])) != 0) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])) != 0) --b;
  return text::lower(s.substr(a, b - a));
}

bool verdict_bool(const json& j, const std::string& key, const char* truthy, const char* falsy,
                  const std::string& raw) {
  if (!j.contains(key)) throw ParseError("judgment lacks key '" + key + "'", raw);
  if (!j.at(key).is_string())
    throw ParseError("judgment key '" + key + "' is not a string", raw);
  const std::string v = lower_trim(j.at(key).get<std::string>());
  if (v == truthy) return true;
  if (v == falsy) return false;
  throw ParseError("judgment key '" + key + "' holds unexpected verdict '" +
                       j.at(key).get<std::string>() + "'",
                   raw);
}

std::string reason_of(const json& j, const std::string& key) {
  if (j.contains(key) && j.at(key).is_string()) return j.at(key).get<std::string>();
  return "";
}

}  // namespace

QualityJudgmentStage1 parse_stage1_judgment(const std::string& completion) {
  const json j = parse_tolerant_object(completion);
  QualityJudgmentStage1 out;
  out.factual = verdict_bool(j, "hallucination", "factual", "hallucination", completion);
  out.context_positive = verdict_bool(j, "context_positive", "correct", "hallucination", completion);
  out.context_negative = verdict_bool(j, "context_negative", "correct", "hallucination", completion);
  out.factual_reason = reason_of(j, "hallucination_reason");
  out.context_positive_reason = reason_of(j, "context_positive_reason");
  out.context_negative_reason = reason_of(j, "context_negative_reason");
  return out;
}

QualityJudgmentStage2 parse_stage2_judgment(const std::string& completion) {
  const json j = parse_tolerant_object(completion);
  QualityJudgmentStage2 out;
  out.factual_p = verdict_bool(j, "hallucination_positive", "factual", "hallucination", completion);
  out.complete_p = verdict_bool(j, "completness_positive", "yes", "no", completion);
  out.factual_n = verdict_bool(j, "hallucination_negative", "factual", "hallucination", completion);
  out.complete_n = verdict_bool(j, "completness_negative", "yes", "no", completion);
  out.factual_p_reason = reason_of(j, "hallucination_positive_reason");
  out.complete_p_reason = reason_of(j, "completness_positive_reason");
  out.factual_n_reason = reason_of(j, "hallucination_negative_reason");
  out.complete_n_reason = reason_of(j, "completness_negative_reason");
  return out;
}

QualityJudgmentStage1 quality_eval_summary(ChatClient& client, const Interaction& interaction,
                                           const std::string& explanation) {
  if (interaction.review_text.empty() || explanation.empty())
    throw ConfigError("quality_eval_summary: review and explanation must be nonempty");
  const Prompt p = render_prompt(PromptId::AuditSummary,
                                 {{"review_text", interaction.review_text},
                                  {"rating", format_number(interaction.rating)},
                                  {"max_rating", std::to_string(interaction.max_rating)},
                                  {"explanation_text", explanation}});
  return parse_stage1_judgment(client.complete(p.system, p.assistant, p.user));
}

QualityJudgmentStage2 quality_eval_features(ChatClient& client,
                                            const std::vector<std::string>& positives,
                                            const std::vector<std::string>& negatives,
                                            const std::string& explanation) {
  if (explanation.empty()) throw ConfigError("quality_eval_features: empty explanation");
  const Prompt p = render_prompt(PromptId::AuditFeatures,
                                 {{"features_positive", render_feature_list(positives)},
                                  {"features_negative", render_feature_list(negatives)},
                                  {"explanation_text", explanation}});
  return parse_stage2_judgment(client.complete(p.system, p.assistant, p.user));
}

QualityReport aggregate_quality(const std::vector<QualityJudgmentStage1>& stage1,
                                const std::vector<QualityJudgmentStage2>& stage2) {
  if (stage1.empty() && stage2.empty())
    throw Error("aggregate_quality: no judgments to aggregate");
  QualityReport r;
  r.n_stage1 = stage1.size();
  r.n_stage2 = stage2.size();
  if (!stage1.empty()) {
    const double n = static_cast<double>(stage1.size());
    size_t f = 0, cp = 0, cn = 0;
    for (const QualityJudgmentStage1& j : stage1) {
      f += j.factual ? 1 : 0;
      cp += j.context_positive ? 1 : 0;
      cn += j.context_negative ? 1 : 0;
    }
    r.factual = static_cast<double>(f) / n;
    r.context_p = static_cast<double>(cp) / n;
    r.context_n = static_cast<double>(cn) / n;
  }
  if (!stage2.empty()) {
    const double n = static_cast<double>(stage2.size());
    size_t fp = 0, compp = 0, fn = 0, compn = 0;
    for (const QualityJudgmentStage2& j : stage2) {
      fp += j.factual_p ? 1 : 0;
      compp += j.complete_p ? 1 : 0;
      fn += j.factual_n ? 1 : 0;
      compn += j.complete_n ? 1 : 0;
    }
    r.factual_p = static_cast<double>(fp) / n;
    r.complete_p = static_cast<double>(compp) / n;
    r.factual_n = static_cast<double>(fn) / n;
    r.complete_n = static_cast<double>(compn) / n;
  }
  return r;
}

// ---- corpus-level driver -----------------------------------------------------------------

DistillOutput distill_corpus(ChatClient& client, const std::vector<Interaction>& interactions,
                             const DistillOptions& options) {
  if (options.word_cap < 1) throw ConfigError("distill: word_cap must be >= 1");
  if (options.in_flight < 1) throw ConfigError("distill: in_flight must be >= 1");

  struct Slot {
    std::optional<ExplanationRecord> record;
    std::optional<Failure> failure;
    bool truncated = false;
    size_t dropped = 0;
  };
  std::vector<Slot> slots(interactions.size());

  auto process = [&](size_t i) {
    const Interaction& it = interactions[i];
    Slot& slot = slots[i];
    SummaryResult summary;
    try {
      summary = summarize_review(client, it, options.word_cap);
    } catch (const ParseError& e) {
      slot.failure = Failure{it.key(), "summarize", e.what(), e.raw};
      return;
    } catch (const Error& e) {
      slot.failure = Failure{it.key(), "summarize", e.what(), ""};
      return;
    }
    try {
      const ExtractionResult extracted = extract_features(client, summary.text);
      ExplanationRecord record;
      record.user_id = it.user_id;
      record.item_id = it.item_id;
      record.rating = it.rating;
      record.timestamp = it.timestamp;
      record.explanation = summary.text;
      record.positive_features = extracted.features.positives;
      record.negative_features = extracted.features.negatives;
      slot.record = std::move(record);
      slot.truncated = summary.truncated;
      slot.dropped = extracted.dropped.size();
    } catch (const ParseError& e) {
      slot.failure = Failure{it.key(), "extract", e.what(), e.raw};
    } catch (const Error& e) {
      slot.failure = Failure{it.key(), "extract", e.what(), ""};
    }
  };

  const size_t n_workers =
      std::min(static_cast<size_t>(options.in_flight), interactions.size());
  if (n_workers <= 1) {
    for (size_t i = 0; i < interactions.size(); ++i) process(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= interactions.size()) return;
          process(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  DistillOutput out;
  for (Slot& slot : slots) {
    if (slot.record.has_value()) {
      out.records.push_back(std::move(*slot.record));
      out.truncated_count += slot.truncated ? 1 : 0;
      out.dropped_phrase_count += slot.dropped;
    } else if (slot.failure.has_value()) {
      out.failures.push_back(std::move(*slot.failure));
    }
  }
  return out;
}

}  // namespace sentrec::distill
