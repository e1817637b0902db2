#include <doctest.h>

#include <string>
#include <vector>

#include "sentrec/errors.hpp"
#include "sentrec/templates.hpp"
#include "sentrec/text.hpp"
#include "sentrec/types.hpp"

using namespace sentrec;

TEST_CASE("render_explanation covers all three sentiment shapes") {
  CHECK(templates::render_explanation({{"crisp display"}, {}}) == "user likes crisp display");
  CHECK(templates::render_explanation({{}, {"dull menu"}}) == "user dislikes dull menu");
  CHECK(templates::render_explanation({{"crisp display", "solid hinge"}, {"dull menu"}}) ==
        "user likes crisp display and solid hinge but dislikes dull menu");
  CHECK_THROWS_AS(templates::render_explanation({{}, {}}), ConfigError);
}

TEST_CASE("parse_explanation inverts render_explanation") {
  const std::vector<FeatureSet> cases = {
      {{"crisp display"}, {}},
      {{}, {"dull menu", "wobbly strap"}},
      {{"crisp display", "solid hinge"}, {"dull menu"}},
      {{"bright camera"}, {"laggy firmware", "sticky keyboard"}},
  };
  for (const auto& fs : cases) {
    FeatureSet back = templates::parse_explanation(templates::render_explanation(fs));
    CHECK(back.positives == fs.positives);
    CHECK(back.negatives == fs.negatives);
  }
}

TEST_CASE("parse_explanation tolerates loose model output") {
  FeatureSet fs = templates::parse_explanation("user likes  crisp display and solid hinge");
  CHECK(fs.positives == std::vector<std::string>{"crisp display", "solid hinge"});
  CHECK(fs.negatives.empty());

  // Neither marker -> empty set, not an error.
  CHECK(templates::parse_explanation("nothing to see here").empty());
  CHECK(templates::parse_explanation("").empty());

  // Duplicates collapse under normalization.
  FeatureSet dup = templates::parse_explanation("user likes crisp display and Crisp  Display");
  CHECK(dup.positives.size() == 1);
}

TEST_CASE("render_review embeds the features and stays long enough") {
  const FeatureSet fs = {{"crisp display"}, {"dull menu"}};
  std::string review = templates::render_review(fs);
  CHECK(text::word_count(review) >= 15);
  CHECK(text::contains_ci(review, "crisp display"));
  CHECK(text::contains_ci(review, "dull menu"));

  auto back = templates::parse_review(review);
  REQUIRE(back.has_value());
  CHECK(back->positives == fs.positives);
  CHECK(back->negatives == fs.negatives);
}

TEST_CASE("render_review round-trips one-sided sets") {
  for (const FeatureSet& fs : std::vector<FeatureSet>{
           {{"solid hinge", "quiet fan"}, {}},
           {{}, {"faded fabric"}},
       }) {
    auto back = templates::parse_review(templates::render_review(fs));
    REQUIRE(back.has_value());
    CHECK(back->positives == fs.positives);
    CHECK(back->negatives == fs.negatives);
  }
}

TEST_CASE("parse_review rejects non-synthetic text") {
  CHECK(!templates::parse_review("I simply enjoyed this product a great deal.").has_value());
  CHECK(!templates::parse_review("").has_value());
}
