#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "sentrec/types.hpp"

namespace sentrec::templates {

// The synthetic corpus speaks a deliberately regular language so that the
// offline rule-based client can invert it losslessly:
//
//   explanation: "user likes A and B but dislikes C"
//                "user likes A"            (positive-only)
//                "user dislikes C and D"   (negative-only)
//
//   review:      "<frame prefix> I liked A and B. I disliked C. <frame suffix>"
//
// Feature phrases never contain the reserved words (and/but/likes/dislikes/
// liked/disliked/user), which keeps both grammars unambiguous.

// Render the canonical explanation for a feature set. At least one side
// must be non-empty.
std::string render_explanation(const FeatureSet& features);

// Render a first-person review that embeds the same feature set. Always at
// least 15 whitespace words long.
std::string render_review(const FeatureSet& features);

// Parse "likes ... dislikes ..." wording out of free text. Tolerant: works on
// canonical explanations and on model output that merely approximates the
// grammar. Phrases are returned in order of appearance, de-duplicated by
// normalized form. Text with neither marker yields an empty set.
FeatureSet parse_explanation(std::string_view explanation);

// Recover the feature set from a synthetic review. Returns std::nullopt when
// the text does not contain the synthetic review grammar.
std::optional<FeatureSet> parse_review(std::string_view review);

}  // namespace sentrec::templates
