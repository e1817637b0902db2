#include <doctest.h>

#include <atomic>
#include <cctype>
#include <functional>
#include <string>
#include <vector>

#include "sentrec/distill.hpp"
#include "sentrec/errors.hpp"
#include "sentrec/templates.hpp"
#include "sentrec/text.hpp"
#include "sentrec/types.hpp"

#include "json.hpp"

using namespace sentrec;
namespace D = sentrec::distill;

namespace {

// Scriptable stand-in used to drive the pipeline steps from canned
// completions. Thread-safe as long as the handler itself is.
class ScriptedClient : public D::ChatClient {
 public:
  using Handler = std::function<std::string(const std::string&, const std::string&,
                                            const std::string&)>;
  explicit ScriptedClient(Handler handler) : handler_(std::move(handler)) {}

  std::string complete(const std::string& system_text, const std::string& assistant_text,
                       const std::string& user_text) override {
    calls_.fetch_add(1);
    return handler_(system_text, assistant_text, user_text);
  }
  std::string name() const override { return "scripted"; }
  int calls() const { return calls_.load(); }

 private:
  Handler handler_;
  std::atomic<int> calls_{0};
};

// True when the text still contains an unsubstituted <lowercase_underscore>
// token, i.e. a placeholder that survived rendering.
bool has_placeholder(const std::string& s) {
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<') continue;
    const size_t end = s.find('>', i + 1);
    if (end == std::string::npos || end == i + 1) continue;
    bool all = true;
    for (size_t j = i + 1; j < end; ++j) {
      const unsigned char c = static_cast<unsigned char>(s[j]);
      if (std::islower(c) == 0 && c != '_') {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

Interaction make_interaction(const std::string& user_id, const std::string& item_id,
                             double rating, int64_t ts, const std::string& review) {
  Interaction it;
  it.user_id = user_id;
  it.item_id = item_id;
  it.rating = rating;
  it.max_rating = 5;
  it.timestamp = ts;
  it.review_text = review;
  return it;
}

}  // namespace

TEST_CASE("render_prompt: summarization prompt is rendered verbatim") {
  const D::Prompt p = D::render_prompt(D::PromptId::Summarize,
                                       {{"rating", "4"},
                                        {"max_rating", "5"},
                                        {"review_text", "I liked the zoom."},
                                        {"n", "15"}});
  CHECK(p.system == "You are a smart recommender system.");
  CHECK(p.assistant == "rating: 4/5, review: I liked the zoom.");
  // The user turn ends with a comma, not a period, and binds the word cap.
  CHECK(p.user ==
        "Please explain within 15 words based on the rating and review of what the user "
        "likes or dislikes about the item,");
  CHECK_FALSE(has_placeholder(p.system));
  CHECK_FALSE(has_placeholder(p.assistant));
  CHECK_FALSE(has_placeholder(p.user));
}

TEST_CASE("render_prompt: extraction prompt keeps its JSON example text") {
  const D::Prompt p = D::render_prompt(D::PromptId::ExtractFeatures, {{"text", "some text"}});
  CHECK(p.system == "You are a helpful assistant.");
  CHECK(p.assistant == "text: some text");
  CHECK(p.user ==
        "Please extract the features that the user likes or dislikes about the item from the "
        "text. The features must be included in the original text. Return the result in JSON "
        "format with the following structure: {'likes': ['feature_1,' 'feature_2'], "
        "'dislikes': ['feature_3', 'feature_4']}. Do not include any other sentences.");
  // The example deliberately keeps the stray comma inside 'feature_1,'.
  CHECK(p.user.find("['feature_1,' 'feature_2']") != std::string::npos);
  CHECK_FALSE(has_placeholder(p.user));
}

TEST_CASE("render_prompt: summary-audit prompt keeps wording and Assessment tail") {
  const D::Prompt p = D::render_prompt(D::PromptId::AuditSummary,
                                       {{"review_text", "Great zoom."},
                                        {"rating", "5"},
                                        {"max_rating", "5"},
                                        {"explanation_text", "user likes zoom"}});
  CHECK(p.system.empty());
  CHECK(p.assistant.empty());
  CHECK(p.user.rfind("As a customer engagement team leader at Amazon, your task involves "
                     "evaluating a summary written by a specialist about why a certain "
                     "purchase was made.",
                     0) == 0);
  // Criterion 2 uses a typographic apostrophe; criteria 4 and 6 use ASCII.
  CHECK(p.user.find("2. hallucination_reason: Provide a concise explanation for your "
                    "assessment of the summary\xE2\x80\x99s hallucination.") !=
        std::string::npos);
  CHECK(p.user.find("4. context_positive_reason: Provide a concise explanation for your "
                    "assessment of the summary's hallucination.") != std::string::npos);
  // The reply-format example ends with a trailing comma before the brace.
  CHECK(p.user.find("\"context_negative_reason\": \"...\",\n}") != std::string::npos);
  const std::string tail =
      "Customer review: Great zoom..\n"
      "Rating: 5 / 5.\n"
      "Specialist's summary of the review: user likes zoom.\n\n"
      "Assessment:";
  REQUIRE(p.user.size() >= tail.size());
  CHECK(p.user.substr(p.user.size() - tail.size()) == tail);
  CHECK_FALSE(has_placeholder(p.user));
}

TEST_CASE("render_prompt: feature-audit prompt keeps completness keys and tail") {
  const D::Prompt p = D::render_prompt(D::PromptId::AuditFeatures,
                                       {{"features_positive", "[\"zoom\"]"},
                                        {"features_negative", "[]"},
                                        {"explanation_text", "user likes zoom"}});
  CHECK(p.system.empty());
  CHECK(p.assistant.empty());
  CHECK(p.user.rfind("As a customer engagement team leader at Amazon, your task involves "
                     "evaluating the positive and negative feature lists extracted from the "
                     "explanation text about a user's experience after purchasing a product.",
                     0) == 0);
  // The criteria and the reply-format example spell "completness" throughout.
  CHECK(p.user.find("3. completness_positive:") != std::string::npos);
  CHECK(p.user.find("7. completness_negative:") != std::string::npos);
  CHECK(p.user.find("\"completness_negative_reason\": \"...\",\n}") != std::string::npos);
  CHECK(p.user.find("completeness.") != std::string::npos);  // prose spells it correctly
  const std::string tail =
      "Positive feature list: [\"zoom\"].\n"
      "Negative feature list: [].\n"
      "Explanation text: user likes zoom.\n\n"
      "Assessment:";
  REQUIRE(p.user.size() >= tail.size());
  CHECK(p.user.substr(p.user.size() - tail.size()) == tail);
  CHECK_FALSE(has_placeholder(p.user));
}

TEST_CASE("render_prompt: unbound placeholders raise ConfigError") {
  CHECK_THROWS_WITH_AS(D::render_prompt(D::PromptId::Summarize,
                                        {{"rating", "4"},
                                         {"max_rating", "5"},
                                         {"review_text", "r"}}),
                       "render_prompt: unbound placeholder <n>", ConfigError);
  CHECK_THROWS_WITH_AS(D::render_prompt(D::PromptId::ExtractFeatures, {}),
                       "render_prompt: unbound placeholder <text>", ConfigError);
  CHECK_THROWS_AS(D::render_prompt(D::PromptId::AuditSummary, {{"review_text", "r"}}),
                  ConfigError);
  CHECK_THROWS_AS(D::render_prompt(D::PromptId::AuditFeatures, {}), ConfigError);
}

TEST_CASE("render_feature_list formats a JSON-style array") {
  CHECK(D::render_feature_list({}) == "[]");
  CHECK(D::render_feature_list({"great zoom"}) == "[\"great zoom\"]");
  CHECK(D::render_feature_list({"a", "b c"}) == "[\"a\", \"b c\"]");
  // Quotes inside phrases are escaped so the list stays parseable.
  CHECK(D::render_feature_list({"say \"hi\""}) == "[\"say \\\"hi\\\"\"]");
}

TEST_CASE("extract_balanced returns the first balanced slice") {
  CHECK(D::extract_balanced("noise {\"a\": {\"b\": 1}} trailing", '{', '}') ==
        "{\"a\": {\"b\": 1}}");
  CHECK(D::extract_balanced("x [1, [2]] y [3]", '[', ']') == "[1, [2]]");
  // Braces inside quoted strings do not count toward the balance.
  CHECK(D::extract_balanced("{\"k\": \"}\"}", '{', '}') == "{\"k\": \"}\"}");
  CHECK(D::extract_balanced("{'k': '}'}", '{', '}') == "{'k': '}'}");

  // A lost opening quote desyncs the strict scan; the fallback still finds
  // the brace-balanced slice instead of running off the end.
  CHECK(D::extract_balanced("x {a\": \"y\"} z", '{', '}') == "{a\": \"y\"}");

  CHECK_THROWS_AS(D::extract_balanced("no object here", '{', '}'), ParseError);
  CHECK_THROWS_AS(D::extract_balanced("{\"open\": 1", '{', '}'), ParseError);
  try {
    D::extract_balanced("plain text", '{', '}');
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw == "plain text");  // raw completion is carried for logging
  }
}

TEST_CASE("repair_json normalizes the common completion deviations") {
  using nlohmann::json;
  auto reparse = [](const std::string& s) { return json::parse(D::repair_json(s)); };

  SUBCASE("single-quoted strings") {
    const json j = reparse("{'likes': ['a b', 'c'], 'dislikes': []}");
    CHECK(j.at("likes").at(0) == "a b");
    CHECK(j.at("dislikes").empty());
  }
  SUBCASE("trailing commas before closers") {
    const json j = reparse("{\"a\": [1, 2,], \"b\": \"x\",}");
    CHECK(j.at("a").size() == 2);
    CHECK(j.at("b") == "x");
  }
  SUBCASE("bare keys and values are quoted") {
    const json j = reparse("{verdict: Factual, n: 3, ok: true, nothing: null}");
    CHECK(j.at("verdict") == "Factual");
    CHECK(j.at("n") == 3);
    CHECK(j.at("ok") == true);
    CHECK(j.at("nothing").is_null());
  }
  SUBCASE("key missing its opening quote") {
    const json j = reparse("{\"a\": \"x\",\nb\": \"y\"}");
    CHECK(j.at("a") == "x");
    CHECK(j.at("b") == "y");
  }
  SUBCASE("double quote inside a single-quoted string") {
    const json j = reparse("{'quote': 'say \"hi\" twice'}");
    CHECK(j.at("quote") == "say \"hi\" twice");
  }
  SUBCASE("apostrophes inside double-quoted strings are preserved") {
    const json j = reparse("{\"r\": \"the list ('a', 'b') is fine\"}");
    CHECK(j.at("r") == "the list ('a', 'b') is fine");
  }
}

TEST_CASE("parse_feature_completion reads likes/dislikes with repair") {
  const FeatureSet fs = D::parse_feature_completion(
      "Sure! Here you go: {'likes': ['fast zoom', 'grip'], 'dislikes': ['heavy body'],}");
  CHECK(fs.positives == std::vector<std::string>{"fast zoom", "grip"});
  CHECK(fs.negatives == std::vector<std::string>{"heavy body"});

  CHECK_THROWS_AS(D::parse_feature_completion("{\"likes\": []}"), ParseError);
  CHECK_THROWS_AS(D::parse_feature_completion("{\"likes\": \"x\", \"dislikes\": []}"),
                  ParseError);
  CHECK_THROWS_AS(D::parse_feature_completion("{\"likes\": [1], \"dislikes\": []}"),
                  ParseError);
  CHECK_THROWS_AS(D::parse_feature_completion("not json at all"), ParseError);
  CHECK_THROWS_AS(D::parse_feature_completion("{\"likes\": }"), ParseError);
}

TEST_CASE("rule-based client inverts the synthetic grammar") {
  D::RuleBasedClient client;
  FeatureSet fs;
  fs.positives = {"fast charging", "bright screen"};
  fs.negatives = {"flimsy hinge"};
  const std::string review = templates::render_review(fs);
  const Interaction it = make_interaction("u1", "i1", 4.0, 100, review);

  SUBCASE("summarization returns the canonical explanation") {
    const D::SummaryResult summary = D::summarize_review(client, it, 15);
    CHECK(summary.text == templates::render_explanation(fs));
    CHECK_FALSE(summary.truncated);
  }
  SUBCASE("extraction recovers the feature set from the explanation") {
    const std::string explanation = templates::render_explanation(fs);
    const D::ExtractionResult ex = D::extract_features(client, explanation);
    CHECK(ex.features.positives == fs.positives);
    CHECK(ex.features.negatives == fs.negatives);
    CHECK(ex.dropped.empty());
  }
  SUBCASE("off-grammar reviews fall back to a word-capped echo") {
    const Interaction odd =
        make_interaction("u2", "i2", 3.0, 101,
                         "one two three four five six seven eight nine ten eleven twelve "
                         "thirteen fourteen fifteen sixteen");
    const D::SummaryResult summary = D::summarize_review(client, odd, 15);
    CHECK(text::word_count(summary.text) <= 15);
    CHECK(summary.text.rfind("one two three", 0) == 0);
  }
  SUBCASE("unrecognized prompts are rejected") {
    CHECK_THROWS_AS(client.complete("", "", "What is the weather like?"), ClientError);
  }
}

TEST_CASE("rule-based audit confirms faithful summaries and flags planted defects") {
  D::RuleBasedClient client;
  FeatureSet fs;
  fs.positives = {"fast charging"};
  fs.negatives = {"dull screen"};
  const Interaction it = make_interaction("u1", "i1", 3.0, 100, templates::render_review(fs));

  SUBCASE("faithful summary passes all three checks") {
    const D::QualityJudgmentStage1 j =
        D::quality_eval_summary(client, it, templates::render_explanation(fs));
    CHECK(j.factual);
    CHECK(j.context_positive);
    CHECK(j.context_negative);
    CHECK_FALSE(j.factual_reason.empty());
  }
  SUBCASE("fabricated feature flips the factuality verdict") {
    FeatureSet wrong;
    wrong.positives = {"telephoto lens"};
    const D::QualityJudgmentStage1 j =
        D::quality_eval_summary(client, it, templates::render_explanation(wrong));
    CHECK_FALSE(j.factual);
  }
  SUBCASE("negative feature presented as positive flips context_positive") {
    FeatureSet flipped;
    flipped.positives = {"dull screen"};
    const D::QualityJudgmentStage1 j =
        D::quality_eval_summary(client, it, templates::render_explanation(flipped));
    CHECK(j.factual);  // the phrase does occur in the review text
    CHECK_FALSE(j.context_positive);
    CHECK(j.context_negative);
  }
  SUBCASE("positive feature presented as negative flips context_negative") {
    FeatureSet flipped;
    flipped.negatives = {"fast charging"};
    const D::QualityJudgmentStage1 j =
        D::quality_eval_summary(client, it, templates::render_explanation(flipped));
    CHECK(j.context_positive);
    CHECK_FALSE(j.context_negative);
  }
}

TEST_CASE("rule-based feature audit checks hallucination and completeness per side") {
  D::RuleBasedClient client;
  const std::string explanation = templates::render_explanation(
      {{"crisp sound", "long battery"}, {"flimsy hinge"}});

  SUBCASE("exact lists pass all four checks") {
    const D::QualityJudgmentStage2 j = D::quality_eval_features(
        client, {"crisp sound", "long battery"}, {"flimsy hinge"}, explanation);
    CHECK(j.factual_p);
    CHECK(j.complete_p);
    CHECK(j.factual_n);
    CHECK(j.complete_n);
  }
  SUBCASE("hallucinated positive feature flips factual_p only") {
    const D::QualityJudgmentStage2 j = D::quality_eval_features(
        client, {"crisp sound", "long battery", "telephoto lens"}, {"flimsy hinge"},
        explanation);
    CHECK_FALSE(j.factual_p);
    CHECK(j.complete_p);
    CHECK(j.factual_n);
    CHECK(j.complete_n);
  }
  SUBCASE("missing negative feature flips complete_n only") {
    const D::QualityJudgmentStage2 j = D::quality_eval_features(
        client, {"crisp sound", "long battery"}, {}, explanation);
    CHECK(j.factual_p);
    CHECK(j.complete_p);
    CHECK(j.factual_n);  // an empty list hallucinates nothing
    CHECK_FALSE(j.complete_n);
  }
  SUBCASE("empty explanation is rejected") {
    CHECK_THROWS_AS(D::quality_eval_features(client, {}, {}, ""), ConfigError);
  }
}

TEST_CASE("stage-1 judgment parses a canonical evaluator reply") {
  // A reply in the documented format, kept faithful to real completions:
  // uneven spacing, a tab after one value, and a trailing comma before `}`.
  const std::string completion =
      "{\n"
      "\"hallucination\": \"Factual\",\n"
      "\"hallucination_reason\": \"The summary accurately reflects the features mentioned "
      "in the customer review without adding unrelated features.\",\n"
      "\"context_positive\": \"Correct\",\n"
      "\"context_positive_reason\":  \"The summary correctly identifies the positive "
      "aspects of the review, such as tasty food, quick service, and affordability.\",\n"
      "\"context_negative\":  \"Correct\",\n"
      "\"context_negative_reason\":  \"The summary correctly identifies the negative "
      "aspect of the review, which is the limited parking.\",\t\n"
      "}";
  const D::QualityJudgmentStage1 j = D::parse_stage1_judgment(completion);
  CHECK(j.factual);
  CHECK(j.context_positive);
  CHECK(j.context_negative);
  CHECK(j.factual_reason ==
        "The summary accurately reflects the features mentioned in the customer review "
        "without adding unrelated features.");
  CHECK(j.context_negative_reason ==
        "The summary correctly identifies the negative aspect of the review, which is the "
        "limited parking.");
}

TEST_CASE("stage-2 judgment parses a canonical evaluator reply with a stray key") {
  // As above, plus the deviation seen in the wild: the last key lost its
  // opening quote, and reasons quote phrases with single quotes.
  const std::string completion =
      "{\n"
      "\"hallucination_positive\": \"Factual\",\n"
      "\"hallucination_positive_reason\": \"All positive features listed ('tasty hot "
      "chicken', 'quick service', 'affordability') are mentioned in the explanation "
      "text.\",\n"
      "\"completness_positive\": \"Yes\",\n"
      "\"completness_positive_reason\":  \"The positive feature list includes all the "
      "positive features mentioned in the explanation text.\",\n"
      "\"hallucination_negative\":  \"Factual\",\n"
      "\"hallucination_negative_reason\":  \"The negative feature 'limited parking' is "
      "mentioned in the explanation text.\",\t\n"
      "\"completness_negative\": \"Yes\",\n"
      "completness_negative_reason\": \"The negative feature list includes all the "
      "negative features mentioned in the explanation text.\",\n"
      "}";
  const D::QualityJudgmentStage2 j = D::parse_stage2_judgment(completion);
  CHECK(j.factual_p);
  CHECK(j.complete_p);
  CHECK(j.factual_n);
  CHECK(j.complete_n);
  CHECK(j.factual_p_reason ==
        "All positive features listed ('tasty hot chicken', 'quick service', "
        "'affordability') are mentioned in the explanation text.");
  CHECK(j.complete_n_reason ==
        "The negative feature list includes all the negative features mentioned in the "
        "explanation text.");
}

TEST_CASE("verdict parsing trims, ignores case, and validates") {
  const D::QualityJudgmentStage1 j = D::parse_stage1_judgment(
      "{\"hallucination\": \"  FACTUAL \", \"context_positive\": \"hallucination\", "
      "\"context_negative\": \"Correct\"}");
  CHECK(j.factual);
  CHECK_FALSE(j.context_positive);
  CHECK(j.context_negative);
  CHECK(j.factual_reason.empty());  // absent reasons default to empty

  CHECK_THROWS_AS(D::parse_stage1_judgment("{\"context_positive\": \"Correct\", "
                                           "\"context_negative\": \"Correct\"}"),
                  ParseError);  // missing verdict key
  CHECK_THROWS_AS(D::parse_stage1_judgment("{\"hallucination\": \"maybe\", "
                                           "\"context_positive\": \"Correct\", "
                                           "\"context_negative\": \"Correct\"}"),
                  ParseError);  // unexpected verdict word
  CHECK_THROWS_AS(D::parse_stage1_judgment("{\"hallucination\": true, "
                                           "\"context_positive\": \"Correct\", "
                                           "\"context_negative\": \"Correct\"}"),
                  ParseError);  // non-string verdict
  CHECK_THROWS_AS(D::parse_stage2_judgment("{\"hallucination_positive\": \"Factual\"}"),
                  ParseError);
}

TEST_CASE("aggregate_quality reproduces hand-computed ratios exactly") {
  auto s1 = [](bool f, bool cp, bool cn) {
    D::QualityJudgmentStage1 j;
    j.factual = f;
    j.context_positive = cp;
    j.context_negative = cn;
    return j;
  };
  auto s2 = [](bool fp, bool cp, bool fn, bool cn) {
    D::QualityJudgmentStage2 j;
    j.factual_p = fp;
    j.complete_p = cp;
    j.factual_n = fn;
    j.complete_n = cn;
    return j;
  };

  const std::vector<D::QualityJudgmentStage1> stage1{
      s1(true, true, true), s1(true, false, true), s1(true, false, true),
      s1(false, false, true)};
  const std::vector<D::QualityJudgmentStage2> stage2{s2(true, true, false, true),
                                                     s2(false, true, false, false)};
  const D::QualityReport r = D::aggregate_quality(stage1, stage2);
  CHECK(r.n_stage1 == 4);
  CHECK(r.n_stage2 == 2);
  CHECK(r.factual == 0.75);
  CHECK(r.context_p == 0.25);
  CHECK(r.context_n == 1.0);
  CHECK(r.factual_p == 0.5);
  CHECK(r.complete_p == 1.0);
  CHECK(r.factual_n == 0.0);
  CHECK(r.complete_n == 0.5);

  // A stage with no judgments reports zero ratios and a zero count.
  const D::QualityReport only1 = D::aggregate_quality(stage1, {});
  CHECK(only1.n_stage2 == 0);
  CHECK(only1.factual_p == 0.0);
  CHECK(only1.factual == 0.75);

  CHECK_THROWS_AS(D::aggregate_quality({}, {}), Error);
}

TEST_CASE("summarize_review retries once over the cap, then truncates") {
  const Interaction it = make_interaction("u1", "i1", 4.0, 100, "some review");

  SUBCASE("persistently long completions are truncated and flagged") {
    std::string long_text;
    for (int i = 0; i < 20; ++i) long_text += "w" + std::to_string(i) + " ";
    ScriptedClient client([&](const std::string&, const std::string&, const std::string&) {
      return long_text;
    });
    const D::SummaryResult r = D::summarize_review(client, it, 15);
    CHECK(client.calls() == 2);
    CHECK(r.truncated);
    CHECK(text::word_count(r.text) == 15);
    CHECK(r.text.rfind("w0 w1 w2", 0) == 0);
  }
  SUBCASE("a compliant retry is kept untruncated") {
    ScriptedClient client([](const std::string&, const std::string&, const std::string&) {
      static std::atomic<int> n{0};
      return n.fetch_add(1) == 0 ? "one two three four five six seven eight nine ten eleven "
                                   "twelve thirteen fourteen fifteen sixteen"
                                 : "short enough";
    });
    const D::SummaryResult r = D::summarize_review(client, it, 15);
    CHECK(client.calls() == 2);
    CHECK_FALSE(r.truncated);
    CHECK(r.text == "short enough");
  }
  SUBCASE("whitespace in completions is collapsed") {
    ScriptedClient client([](const std::string&, const std::string&, const std::string&) {
      return "  spaced   out\ttext \n";
    });
    CHECK(D::summarize_review(client, it, 15).text == "spaced out text");
  }
  SUBCASE("client errors carry the interaction key") {
    ScriptedClient client([](const std::string&, const std::string&,
                             const std::string&) -> std::string {
      throw ClientError("backend down");
    });
    try {
      D::summarize_review(client, it, 15);
      FAIL("expected ClientError");
    } catch (const ClientError& e) {
      CHECK(std::string(e.what()).find("backend down") != std::string::npos);
      CHECK(e.key == it.key());
    }
  }
  SUBCASE("word cap is validated") {
    ScriptedClient client([](const std::string&, const std::string&, const std::string&) {
      return "x";
    });
    CHECK_THROWS_AS(D::summarize_review(client, it, 0), ConfigError);
  }
}

TEST_CASE("extract_features dedupes, drops off-text phrases, and retries") {
  const std::string text_in = "user likes the great display but dislikes weak battery";

  SUBCASE("duplicates collapse and absent phrases are dropped") {
    ScriptedClient client([](const std::string&, const std::string&, const std::string&) {
      return "{'likes': ['Great Display', 'great  display', 'phantom'], "
             "'dislikes': ['weak battery', '  ']}";
    });
    const D::ExtractionResult r = D::extract_features(client, text_in);
    CHECK(r.features.positives == std::vector<std::string>{"Great Display"});
    CHECK(r.features.negatives == std::vector<std::string>{"weak battery"});
    REQUIRE(r.dropped.size() == 2);
    CHECK(r.dropped[0] == "phantom");
    CHECK(r.dropped[1] == "  ");  // normalized away to nothing
  }
  SUBCASE("one garbage completion is retried, two raise ParseError") {
    ScriptedClient once([](const std::string&, const std::string&, const std::string&) {
      static std::atomic<int> n{0};
      return n.fetch_add(1) == 0 ? "no json here"
                                 : "{\"likes\": [\"weak battery\"], \"dislikes\": []}";
    });
    const D::ExtractionResult r = D::extract_features(once, text_in);
    CHECK(once.calls() == 2);
    CHECK(r.features.positives == std::vector<std::string>{"weak battery"});

    ScriptedClient never([](const std::string&, const std::string&, const std::string&) {
      return "still no json";
    });
    try {
      D::extract_features(never, text_in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(never.calls() == 2);
      CHECK(e.raw == "still no json");
    }
  }
  SUBCASE("empty input text is rejected") {
    ScriptedClient client([](const std::string&, const std::string&, const std::string&) {
      return "{}";
    });
    CHECK_THROWS_AS(D::extract_features(client, ""), ConfigError);
  }
}

namespace {

// Scripted corpus driver: summaries and extractions are keyed off marker
// words so the same handler serves any in-flight schedule.
ScriptedClient::Handler corpus_handler() {
  return [](const std::string&, const std::string& assistant_text,
            const std::string& user_text) -> std::string {
    if (user_text.rfind("Please explain within", 0) == 0) {
      if (assistant_text.find("alpha") != std::string::npos) return "user likes solid build";
      if (assistant_text.find("bravo") != std::string::npos) return "user likes quick menu";
      if (assistant_text.find("charlie") != std::string::npos) {
        std::string out;
        for (int i = 0; i < 20; ++i) out += "omega ";
        return out;
      }
      throw ClientError("unknown summarize fixture");
    }
    if (user_text.rfind("Please extract the features", 0) == 0) {
      if (assistant_text.find("solid build") != std::string::npos)
        return "{\"likes\": [\"solid build\"], \"dislikes\": []}";
      if (assistant_text.find("quick menu") != std::string::npos) return "no braces at all";
      if (assistant_text.find("omega") != std::string::npos)
        return "{'likes': ['omega omega', 'phantom gadget'], 'dislikes': []}";
      throw ClientError("unknown extract fixture");
    }
    throw ClientError("unknown fixture prompt");
  };
}

}  // namespace

TEST_CASE("distill_corpus keeps input order and routes failures") {
  const std::vector<Interaction> corpus{
      make_interaction("uA", "iA", 4.0, 111, "alpha review text"),
      make_interaction("uB", "iB", 2.0, 222, "bravo review text"),
      make_interaction("uC", "iC", 5.0, 333, "charlie review text"),
  };
  ScriptedClient client(corpus_handler());
  D::DistillOptions options;
  options.word_cap = 15;
  options.in_flight = 1;
  const D::DistillOutput out = D::distill_corpus(client, corpus, options);

  REQUIRE(out.records.size() == 2);
  CHECK(out.records[0].user_id == "uA");
  CHECK(out.records[0].item_id == "iA");
  CHECK(out.records[0].rating == 4.0);
  CHECK(out.records[0].timestamp == 111);
  CHECK(out.records[0].explanation == "user likes solid build");
  CHECK(out.records[0].positive_features == std::vector<std::string>{"solid build"});
  CHECK(out.records[1].user_id == "uC");
  CHECK(text::word_count(out.records[1].explanation) == 15);
  CHECK(out.records[1].positive_features == std::vector<std::string>{"omega omega"});

  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].key == corpus[1].key());
  CHECK(out.failures[0].stage == "extract");
  CHECK(out.failures[0].error.find("unparsable completion after retry") != std::string::npos);
  CHECK(out.failures[0].raw == "no braces at all");

  CHECK(out.truncated_count == 1);       // charlie's summary was cut to the cap
  CHECK(out.dropped_phrase_count == 1);  // "phantom gadget" never occurs in the text
}

TEST_CASE("distill_corpus results do not depend on in_flight") {
  const std::vector<Interaction> corpus{
      make_interaction("uA", "iA", 4.0, 111, "alpha review text"),
      make_interaction("uB", "iB", 2.0, 222, "bravo review text"),
      make_interaction("uC", "iC", 5.0, 333, "charlie review text"),
  };
  auto run = [&](int in_flight) {
    ScriptedClient client(corpus_handler());
    D::DistillOptions options;
    options.in_flight = in_flight;
    return D::distill_corpus(client, corpus, options);
  };
  const D::DistillOutput serial = run(1);
  const D::DistillOutput threaded = run(4);
  REQUIRE(serial.records.size() == threaded.records.size());
  for (size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].user_id == threaded.records[i].user_id);
    CHECK(serial.records[i].explanation == threaded.records[i].explanation);
    CHECK(serial.records[i].positive_features == threaded.records[i].positive_features);
    CHECK(serial.records[i].negative_features == threaded.records[i].negative_features);
  }
  REQUIRE(serial.failures.size() == threaded.failures.size());
  CHECK(serial.failures[0].key == threaded.failures[0].key);
  CHECK(serial.truncated_count == threaded.truncated_count);
  CHECK(serial.dropped_phrase_count == threaded.dropped_phrase_count);
}

TEST_CASE("distill_corpus validates its options") {
  ScriptedClient client(corpus_handler());
  D::DistillOptions bad_cap;
  bad_cap.word_cap = 0;
  CHECK_THROWS_AS(D::distill_corpus(client, {}, bad_cap), ConfigError);
  D::DistillOptions bad_flight;
  bad_flight.in_flight = 0;
  CHECK_THROWS_AS(D::distill_corpus(client, {}, bad_flight), ConfigError);
}

TEST_CASE("quality_eval_summary validates its inputs") {
  D::RuleBasedClient client;
  const Interaction empty_review = make_interaction("u", "i", 3.0, 1, "");
  CHECK_THROWS_AS(D::quality_eval_summary(client, empty_review, "user likes x"), ConfigError);
  const Interaction ok = make_interaction("u", "i", 3.0, 1, "some review");
  CHECK_THROWS_AS(D::quality_eval_summary(client, ok, ""), ConfigError);
}
