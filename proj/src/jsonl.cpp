#include "sentrec/jsonl.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "sentrec/errors.hpp"
#include "sentrec/text.hpp"

namespace sentrec::jsonl {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

[[noreturn]] void fail_line(const std::string& path, size_t line, const std::string& why,
                            const std::string& raw) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + why, raw);
}

template <typename Parse>
void scan_lines(const std::string& path, const ReadOptions& opt,
                std::vector<LineIssue>* issues, Parse parse) {
  std::ifstream in = open_in(path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string problem;
    try {
      const json j = json::parse(line);
      problem = parse(j);
    } catch (const json::exception& e) {
      problem = std::string("not valid JSON: ") + e.what();
    }
    if (!problem.empty()) {
      if (opt.strict) fail_line(path, lineno, problem, line);
      issues->push_back({lineno, problem});
    }
  }
}

std::string need_string(const json& j, const char* key, std::string* out) {
  if (!j.contains(key) || !j[key].is_string()) return std::string("missing string field '") + key + "'";
  *out = j[key].get<std::string>();
  return {};
}

std::string need_number(const json& j, const char* key, double* out) {
  if (!j.contains(key) || !j[key].is_number()) return std::string("missing numeric field '") + key + "'";
  *out = j[key].get<double>();
  return {};
}

std::string need_string_array(const json& j, const char* key, std::vector<std::string>* out) {
  if (!j.contains(key) || !j[key].is_array()) return std::string("missing array field '") + key + "'";
  out->clear();
  for (const auto& e : j[key]) {
    if (!e.is_string()) return std::string("non-string entry in '") + key + "'";
    out->push_back(e.get<std::string>());
  }
  return {};
}

}  // namespace

std::string validate_explanation_record(const ExplanationRecord& record) {
  auto check_side = [&](const std::vector<std::string>& phrases, const char* side) -> std::string {
    std::unordered_set<std::string> seen;
    for (const std::string& p : phrases) {
      if (p.empty()) return std::string(side) + " feature is empty";
      if (!text::contains_ci(record.explanation, p)) {
        return std::string(side) + " feature '" + p + "' not found in explanation";
      }
      if (!seen.insert(text::normalize_phrase(p)).second) {
        return std::string("duplicate ") + side + " feature '" + p + "'";
      }
    }
    return {};
  };
  if (std::string e = check_side(record.positive_features, "positive"); !e.empty()) return e;
  if (std::string e = check_side(record.negative_features, "negative"); !e.empty()) return e;
  return {};
}

InteractionsResult read_interactions(const std::string& path, const ReadOptions& opt) {
  InteractionsResult res;
  scan_lines(path, opt, &res.issues, [&](const json& j) -> std::string {
    Interaction it;
    double rating = 0.0, max_rating = 0.0, ts = 0.0;
    if (auto e = need_string(j, "user", &it.user_id); !e.empty()) return e;
    if (auto e = need_string(j, "item", &it.item_id); !e.empty()) return e;
    if (auto e = need_number(j, "rating", &rating); !e.empty()) return e;
    if (auto e = need_number(j, "max_rating", &max_rating); !e.empty()) return e;
    if (auto e = need_number(j, "timestamp", &ts); !e.empty()) return e;
    if (auto e = need_string(j, "review", &it.review_text); !e.empty()) return e;
    if (max_rating < 1.0) return "max_rating must be >= 1";
    if (rating < 1.0 || rating > max_rating) return "rating outside [1, max_rating]";
    it.rating = rating;
    it.max_rating = static_cast<int>(max_rating);
    it.timestamp = static_cast<int64_t>(ts);
    res.records.push_back(std::move(it));
    return {};
  });
  return res;
}

void write_interactions(const std::string& path, const std::vector<Interaction>& records) {
  std::ofstream out = open_out(path);
  for (const Interaction& it : records) {
    json j;
    j["user"] = it.user_id;
    j["item"] = it.item_id;
    j["rating"] = it.rating;
    j["max_rating"] = it.max_rating;
    j["timestamp"] = it.timestamp;
    j["review"] = it.review_text;
    out << j.dump() << '\n';
  }
}

ExplanationsResult read_explanations(const std::string& path, const ReadOptions& opt) {
  ExplanationsResult res;
  scan_lines(path, opt, &res.issues, [&](const json& j) -> std::string {
    ExplanationRecord rec;
    double rating = 0.0;
    if (auto e = need_string(j, "user", &rec.user_id); !e.empty()) return e;
    if (auto e = need_string(j, "item", &rec.item_id); !e.empty()) return e;
    if (auto e = need_number(j, "rating", &rating); !e.empty()) return e;
    if (auto e = need_string(j, "explanation", &rec.explanation); !e.empty()) return e;
    if (auto e = need_string_array(j, "positive_features", &rec.positive_features); !e.empty()) return e;
    if (auto e = need_string_array(j, "negative_features", &rec.negative_features); !e.empty()) return e;
    rec.rating = rating;
    if (j.contains("timestamp")) {
      if (!j["timestamp"].is_number()) return "timestamp must be numeric";
      rec.timestamp = j["timestamp"].get<int64_t>();
    }
    if (std::string problem = validate_explanation_record(rec); !problem.empty()) return problem;
    res.records.push_back(std::move(rec));
    return {};
  });
  return res;
}

void write_explanations(const std::string& path, const std::vector<ExplanationRecord>& records) {
  std::ofstream out = open_out(path);
  for (const ExplanationRecord& rec : records) {
    json j;
    j["user"] = rec.user_id;
    j["item"] = rec.item_id;
    j["rating"] = rec.rating;
    j["timestamp"] = rec.timestamp;
    j["explanation"] = rec.explanation;
    j["positive_features"] = rec.positive_features;
    j["negative_features"] = rec.negative_features;
    out << j.dump() << '\n';
  }
}

PredictionsResult read_predictions(const std::string& path, const ReadOptions& opt) {
  PredictionsResult res;
  scan_lines(path, opt, &res.issues, [&](const json& j) -> std::string {
    Prediction p;
    if (auto e = need_string(j, "user", &p.user_id); !e.empty()) return e;
    if (auto e = need_string(j, "item", &p.item_id); !e.empty()) return e;
    if (!j.contains("predicted_rating")) return "missing field 'predicted_rating'";
    if (j["predicted_rating"].is_number()) {
      p.has_rating = true;
      p.predicted_rating = j["predicted_rating"].get<double>();
    } else if (!j["predicted_rating"].is_null()) {
      return "predicted_rating must be a number or null";
    }
    if (auto e = need_string(j, "generated_explanation", &p.explanation); !e.empty()) return e;
    res.records.push_back(std::move(p));
    return {};
  });
  return res;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& records) {
  std::ofstream out = open_out(path);
  for (const Prediction& p : records) {
    json j;
    j["user"] = p.user_id;
    j["item"] = p.item_id;
    if (p.has_rating) {
      j["predicted_rating"] = p.predicted_rating;
    } else {
      j["predicted_rating"] = nullptr;
    }
    j["generated_explanation"] = p.explanation;
    out << j.dump() << '\n';
  }
}

}  // namespace sentrec::jsonl
