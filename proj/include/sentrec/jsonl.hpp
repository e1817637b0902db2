#pragma once

#include <string>
#include <vector>

#include "sentrec/types.hpp"

namespace sentrec::jsonl {

struct LineIssue {
  size_t line = 0;  // 1-based
  std::string message;
};

// Strict mode throws ParseError on the first invalid line (message carries the
// line number); lenient mode skips invalid lines and reports them.
struct ReadOptions {
  bool strict = true;
};

struct InteractionsResult {
  std::vector<Interaction> records;
  std::vector<LineIssue> issues;
};

struct ExplanationsResult {
  std::vector<ExplanationRecord> records;
  std::vector<LineIssue> issues;
};

struct PredictionsResult {
  std::vector<Prediction> records;  // features left empty; extraction is the caller's step
  std::vector<LineIssue> issues;
};

// Record-level validity for explanation records: every feature phrase must
// appear in the explanation text (case-insensitive substring) and neither
// side may contain duplicates under normalization. Returns an empty string
// when valid, a diagnostic otherwise.
std::string validate_explanation_record(const ExplanationRecord& record);

InteractionsResult read_interactions(const std::string& path, const ReadOptions& opt = {});
void write_interactions(const std::string& path, const std::vector<Interaction>& records);

ExplanationsResult read_explanations(const std::string& path, const ReadOptions& opt = {});
void write_explanations(const std::string& path, const std::vector<ExplanationRecord>& records);

PredictionsResult read_predictions(const std::string& path, const ReadOptions& opt = {});
void write_predictions(const std::string& path, const std::vector<Prediction>& records);

}  // namespace sentrec::jsonl
