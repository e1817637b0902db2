#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentrec/embed.hpp"
#include "sentrec/rng.hpp"
#include "sentrec/types.hpp"

namespace sentrec::metrics {

// ---- sentiment ------------------------------------------------------------

// Negative-only -> 0, both sides -> 1, positive-only -> 2, neither -> Empty.
SentimentLabel sentiment_label(const FeatureSet& features);

// Fraction of pairs whose labels agree. Empty matches only Empty.
// Inputs must be the same non-zero length.
double sentiment_matching(const std::vector<SentimentLabel>& truth,
                          const std::vector<SentimentLabel>& generated);

// ---- embedding-based content similarity ------------------------------------

// BERTScore-style greedy matching between token lists. Negative cosines are
// clamped to zero. Optional IDF weights are normalized within each side; if
// every weight is zero the match falls back to uniform weights. Both token
// lists must be non-empty.
double greedy_match_f1(const std::vector<std::string>& candidate,
                       const std::vector<std::string>& reference,
                       const embed::TokenEmbedder& embedder,
                       const embed::IdfTable* idf = nullptr);

// Similarity between two phrase lists of the same polarity:
//   both empty            -> 1.0
//   exactly one empty     -> 0.0
//   otherwise             -> greedy_match_f1 over the tokenized " and "-joins
double content_similarity(const std::vector<std::string>& truth_phrases,
                          const std::vector<std::string>& generated_phrases,
                          const embed::TokenEmbedder& embedder,
                          const embed::IdfTable* idf = nullptr);

// ---- text overlap -----------------------------------------------------------

// Mean over instances of smoothed sentence-level BLEU-n (geometric mean of
// modified n-gram precisions for orders 1..n, eps = 1e-9 substituted for zero
// counts, brevity penalty exp(1 - r/c) when c < r). Inputs are paired and
// non-empty; an empty candidate scores 0 for that instance.
double bleu_n(const std::vector<std::string>& candidates,
              const std::vector<std::string>& references, int n);

struct RougeResult {
  double score = 0.0;   // mean recall over counted instances
  size_t skipped = 0;   // references shorter than n tokens
  size_t counted = 0;
};

// Mean n-gram recall with clipped counts. References shorter than n tokens are
// skipped and reported. Errors if every instance is skipped.
RougeResult rouge_n(const std::vector<std::string>& candidates,
                    const std::vector<std::string>& references, int n);

// ---- distinctness and feature metrics ---------------------------------------

// |unique texts| / N after whitespace normalization.
double usr(const std::vector<std::string>& texts);

// One uniformly chosen word of one uniformly chosen phrase, lowercased.
// std::nullopt when the side has no phrases. Draws two values from `rng`
// when a word is selected (phrase index, then word index).
std::optional<std::string> select_feature_word(const std::vector<std::string>& phrases,
                                               Rng& rng);

// Fraction of eligible instances (selected word present) whose generated text
// contains the word as a whole lowercase token. Errors when nothing is
// eligible.
double fmr(const std::vector<std::optional<std::string>>& selected_words,
           const std::vector<std::string>& generated_texts);

// |vocabulary words appearing in any generated text| / |vocabulary|.
// The vocabulary is the set of unique selected ground-truth words.
double fcr(const std::set<std::string>& vocabulary,
           const std::vector<std::string>& generated_texts);

// DIV = 2/(N(N-1)) * sum over unordered pairs of |F_a intersect F_b| where
// F_i = vocabulary words found as whole tokens in generated text i. N >= 2.
double div_repetition(const std::vector<std::set<std::string>>& per_instance_features);

// ---- rating error ------------------------------------------------------------

struct MaeRmse {
  double mae = 0.0;
  double rmse = 0.0;
};
MaeRmse mae_rmse(const std::vector<double>& truth, const std::vector<double>& predicted);

// ---- aggregate evaluation ------------------------------------------------------

struct EvaluateConfig {
  const embed::TokenEmbedder* embedder = nullptr;  // required
  bool use_idf = false;
  uint64_t seed = 0;
  int bert_dim_note = 0;  // unused placeholder for config echo stability
};

struct InstanceScores {
  double bleu1 = 0.0, bleu4 = 0.0;
  double rouge1 = 0.0, rouge2 = 0.0;
  bool rouge1_skipped = false, rouge2_skipped = false;
  double bert_f1 = 0.0;
  double content_p = 0.0, content_n = 0.0;
  bool sentiment_match = false;
  SentimentLabel truth_label = SentimentLabel::Empty;
  SentimentLabel generated_label = SentimentLabel::Empty;
};

struct MetricReport {
  size_t n = 0;
  double sentiment = 0.0;
  double content_p = 0.0, content_n = 0.0;
  double bleu1 = 0.0, bleu4 = 0.0;
  double rouge1 = 0.0, rouge2 = 0.0;
  double usr = 0.0;
  double bert = 0.0;
  double fmr_p = 0.0, fcr_p = 0.0, div_p = 0.0;
  double fmr_n = 0.0, fcr_n = 0.0, div_n = 0.0;
  bool has_rating_error = false;
  double mae = 0.0, rmse = 0.0;
  // diagnostics
  size_t rouge1_skipped = 0, rouge2_skipped = 0;
  size_t fmr_p_eligible = 0, fmr_n_eligible = 0;
  size_t empty_generated_labels = 0;
  // config echo
  std::string embedder_name;
  bool used_idf = false;
  uint64_t seed = 0;
  std::vector<InstanceScores> per_instance;  // filled when keep_per_instance
};

// Full evaluation of paired (truth, prediction) lists. Per-instance scores are
// computed in parallel into pre-sized slots; every reduction and every seeded
// draw happens serially in input order, so results are identical across
// thread counts and two runs with the same seed agree exactly.
// A polarity with no ground-truth features at all reports 0.0 for its
// FMR/FCR/DIV (see the *_eligible diagnostics) rather than erroring, and DIV
// is 0.0 when there are fewer than two instances.
MetricReport evaluate(const std::vector<ExplanationRecord>& truth,
                      const std::vector<Prediction>& predictions,
                      const EvaluateConfig& config,
                      bool keep_per_instance = false);

}  // namespace sentrec::metrics
