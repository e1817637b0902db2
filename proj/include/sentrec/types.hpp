#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sentrec {

// One user-item interaction as ingested from a raw corpus.
struct Interaction {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  int max_rating = 5;
  int64_t timestamp = 0;
  std::string review_text;

  // Stable identifier for failure reporting.
  std::string key() const { return user_id + "/" + item_id + "@" + std::to_string(timestamp); }
};

struct FeatureSet {
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  bool empty() const { return positives.empty() && negatives.empty(); }
};

// 0 = only negative features, 1 = both sides present, 2 = only positive.
// Empty covers records with no features on either side.
enum class SentimentLabel { Negative = 0, Mixed = 1, Positive = 2, Empty = 3 };

// A distilled (or synthesized) explanation aligned with one interaction.
// `timestamp` is carried through so downstream chronological splitting does
// not need to re-join against the interaction stream.
struct ExplanationRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  int64_t timestamp = 0;
  std::string explanation;
  std::vector<std::string> positive_features;
  std::vector<std::string> negative_features;

  FeatureSet features() const { return {positive_features, negative_features}; }
};

// Output of a generation run, paired by position with the ground-truth
// test records when evaluated.
struct Prediction {
  std::string user_id;
  std::string item_id;
  bool has_rating = false;
  double predicted_rating = 0.0;
  std::string explanation;
  FeatureSet features;  // extracted from `explanation` by the configured extractor
};

}  // namespace sentrec
