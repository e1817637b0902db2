#pragma once

#include <map>
#include <string>
#include <vector>

#include "sentrec/types.hpp"

namespace sentrec::distill {

// The four prompt templates: the two dataset-construction prompts and the
// two audit prompts. Placeholders are written <like_this> inside the
// templates and must all be bound at render time.
enum class PromptId { Summarize, ExtractFeatures, AuditSummary, AuditFeatures };

struct Prompt {
  std::string system;
  std::string assistant;
  std::string user;
};

using Bindings = std::map<std::string, std::string>;

// Substitutes bindings into the template. Throws ConfigError naming the first
// unbound placeholder. No other mutation of the template text.
Prompt render_prompt(PromptId id, const Bindings& bindings);

// `["a", "b"]` formatting used for the audit prompts' feature-list slots.
std::string render_feature_list(const std::vector<std::string>& phrases);

// Minimal chat-completion interface. Implementations must either return the
// completion text or throw a typed error; they must be safe to call from
// several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::string& system_text, const std::string& assistant_text,
                               const std::string& user_text) = 0;
  virtual std::string name() const = 0;
};

// Deterministic offline stand-in for the remote model. It inverts the
// synthetic corpus grammar: summaries come from parsing the review, feature
// extraction from parsing the explanation, and the audit verdicts from
// substring/containment checks. Stateless and thread-safe.
class RuleBasedClient : public ChatClient {
 public:
  std::string complete(const std::string& system_text, const std::string& assistant_text,
                       const std::string& user_text) override;
  std::string name() const override { return "rule-based"; }
};

// ---- tolerant JSON ------------------------------------------------------------

// Returns the first balanced {...} (or [...] when `open` says so) slice of
// `text`, respecting quoted strings. Throws ParseError when none is found.
std::string extract_balanced(const std::string& text, char open, char close);

// Normalizes common LLM deviations inside a balanced JSON slice: single-quoted
// strings, trailing commas, and bare (or partially quoted) keys and values.
std::string repair_json(const std::string& object_text);

// ---- pipeline steps -------------------------------------------------------------

struct SummaryResult {
  std::string text;
  bool truncated = false;  // completion exceeded the cap twice and was cut
};

// Renders the summarization prompt and returns the completion. Completions
// longer than `word_cap` words are retried once, then truncated and flagged.
SummaryResult summarize_review(ChatClient& client, const Interaction& interaction,
                               int word_cap = 15);

struct ExtractionResult {
  FeatureSet features;
  std::vector<std::string> dropped;  // phrases that were not substrings of the text
};

// Renders the extraction prompt and parses the completion as an object with
// `likes`/`dislikes` string arrays. Phrases are deduplicated preserving order;
// phrases that do not occur in `text` (case-insensitive) are dropped and
// reported. Unparsable completions are retried once, then raised as
// ParseError with the raw completion attached.
ExtractionResult extract_features(ChatClient& client, const std::string& text);

// Parses one completion into a feature set (no dedup/substring filtering).
FeatureSet parse_feature_completion(const std::string& completion);

// ---- quality audit ---------------------------------------------------------------

struct QualityJudgmentStage1 {
  bool factual = false;           // "Factual" on the hallucination key
  bool context_positive = false;  // "Correct"
  bool context_negative = false;  // "Correct"
  std::string factual_reason;
  std::string context_positive_reason;
  std::string context_negative_reason;
};

struct QualityJudgmentStage2 {
  bool factual_p = false;   // hallucination_positive: "Factual"
  bool complete_p = false;  // completness_positive: "Yes"
  bool factual_n = false;
  bool complete_n = false;
  std::string factual_p_reason;
  std::string complete_p_reason;
  std::string factual_n_reason;
  std::string complete_n_reason;
};

struct QualityReport {
  double factual = 0.0;
  double context_p = 0.0;
  double context_n = 0.0;
  double factual_p = 0.0;
  double complete_p = 0.0;
  double factual_n = 0.0;
  double complete_n = 0.0;
  size_t n_stage1 = 0;
  size_t n_stage2 = 0;
};

QualityJudgmentStage1 quality_eval_summary(ChatClient& client, const Interaction& interaction,
                                           const std::string& explanation);
QualityJudgmentStage2 quality_eval_features(ChatClient& client,
                                            const std::vector<std::string>& positives,
                                            const std::vector<std::string>& negatives,
                                            const std::string& explanation);

// Completion parsers, exposed so canned judgments can be decoded directly.
QualityJudgmentStage1 parse_stage1_judgment(const std::string& completion);
QualityJudgmentStage2 parse_stage2_judgment(const std::string& completion);

// Each ratio is favorable verdicts / judged instances for its stage. Throws
// when both judgment lists are empty.
QualityReport aggregate_quality(const std::vector<QualityJudgmentStage1>& stage1,
                                const std::vector<QualityJudgmentStage2>& stage2);

// ---- corpus-level driver ------------------------------------------------------------

struct Failure {
  std::string key;    // Interaction::key()
  std::string stage;  // "summarize" or "extract"
  std::string error;
  std::string raw;  // raw completion for parse failures, empty otherwise
};

struct DistillOptions {
  int word_cap = 15;
  int in_flight = 4;  // maximum concurrent client calls
};

struct DistillOutput {
  std::vector<ExplanationRecord> records;  // input order, failures skipped
  std::vector<Failure> failures;           // input order
  size_t truncated_count = 0;
  size_t dropped_phrase_count = 0;
};

// Runs summarize + extract over every interaction. Records keep the input
// order regardless of completion order; failed interactions are routed to
// `failures` instead of aborting the run.
DistillOutput distill_corpus(ChatClient& client, const std::vector<Interaction>& interactions,
                             const DistillOptions& options = {});

// ---- remote client -------------------------------------------------------------------

struct HttpClientConfig {
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  int timeout_sec = 30;
  int max_retries = 1;   // additional attempts after the first
  int backoff_ms = 500;  // doubled per retry
};

// OpenAI-style chat-completion client. Reads the bearer token from the
// SENTREC_API_KEY environment variable at call time (requests are sent
// without an Authorization header when it is unset).
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const std::string& system_text, const std::string& assistant_text,
                       const std::string& user_text) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpClientConfig config_;
};

}  // namespace sentrec::distill
