#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sentrec/types.hpp"

namespace sentrec::corpus {

// Keep interactions whose review has at least `min_words` whitespace words.
std::vector<Interaction> filter_short_reviews(const std::vector<Interaction>& interactions,
                                              int min_words = 15);

// Iteratively remove interactions of users/items with fewer than k
// interactions until a fixpoint; may return an empty corpus.
std::vector<Interaction> kcore_filter(const std::vector<Interaction>& interactions, int k = 20);

struct SplitDataset {
  std::vector<ExplanationRecord> train, valid, test;
};

// Per user, ordered by (timestamp, item_id, input position): the latest record
// goes to test, the second latest to valid, the rest to train. Users with two
// records contribute test+valid only; users with one contribute train only.
// Errors on empty input.
SplitDataset chronological_split(const std::vector<ExplanationRecord>& records);

struct SyntheticSpec {
  int n_users = 100;
  int n_items = 60;
  int interactions_per_user = 100;
  int max_rating = 5;
  double tau_lo = 2.0;  // rating <= tau_lo -> negative-only
  double tau_hi = 4.0;  // rating >= tau_hi -> positive-only
  uint64_t seed = 42;
  // Feature phrases are "<adjective> <noun>"; none of the words below may
  // collide with the reserved template words (user/likes/dislikes/and/but/
  // liked/disliked).
  std::vector<std::string> nouns;
  std::vector<std::string> positive_adjectives;
  std::vector<std::string> negative_adjectives;

  static SyntheticSpec defaults();
  void validate() const;  // throws ConfigError
};

struct SyntheticCorpus {
  std::vector<Interaction> interactions;
  std::vector<ExplanationRecord> records;  // aligned with interactions
};

// Deterministic synthetic corpus. Ratings carry user and item biases; which
// sides are populated follows the tau rule on the drawn rating; phrase choice
// is biased by a per-user preference ordering so user identity is predictive
// of content. Reviews and explanations use the shared template grammar and
// satisfy the record invariants by construction.
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

struct CorpusStats {
  size_t n_users = 0;
  size_t n_items = 0;
  size_t n_interactions = 0;
  size_t n_positive_features = 0;  // unique, normalized
  size_t n_negative_features = 0;
  double records_per_user = 0.0;
  double records_per_item = 0.0;
  double words_per_explanation = 0.0;
  int max_rating = 0;
};

CorpusStats corpus_stats(const std::vector<ExplanationRecord>& records, int max_rating);

// Threshold grammar: "=n" exact count, ">n" strictly greater.
struct OccurrenceBucket {
  std::string label;
  double positive_ratio = 0.0;
  double negative_ratio = 0.0;
};

// Share of unique (normalized) feature phrases whose total mention count
// falls in each bucket. Errors on malformed thresholds.
std::vector<OccurrenceBucket> feature_occurrence_ratio(
    const std::vector<ExplanationRecord>& records,
    const std::vector<std::string>& thresholds);

using Labeler = std::function<SentimentLabel(const FeatureSet&)>;

// Shares per label, keyed by the rounded rating bucket. Values index by the
// SentimentLabel enum; each bucket's shares sum to 1.
using RatingSentimentDistribution = std::map<int, std::array<double, 4>>;

RatingSentimentDistribution rating_sentiment_distribution(
    const std::vector<ExplanationRecord>& records, const Labeler& labeler);

// Half-away-from-zero rounding clamped to [0, max_rating]; shared with the
// discrete rating-embedding lookup.
int round_rating(double rating, int max_rating);

}  // namespace sentrec::corpus
