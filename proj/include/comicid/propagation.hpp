#pragma once

// Label propagation across the relationship matrix, in both directions. Each
// operator picks the single highest-scored pair for a region first and only
// then applies the confidence filter: a low-confidence winner suppresses the
// region instead of falling through to the runner-up.

#include "comicid/core.hpp"

namespace comicid {

// H(t->c): for every character region with at least one scored pair, take the
// argmax pair; emit that text's label as the character's pseudo label when the
// label is present and its confidence level passes min_level.
PseudoLabelSet propagate_text_to_char(const RelationshipMatrix& matrix, const LabelAssignment& text_assignment,
                                      int min_level = 3);

// H(c->t): for every text region with at least one scored pair, take the
// argmax character; emit its label as the text's speaker candidate when the
// label is present with probability >= min_prob.
PseudoLabelSet propagate_char_to_text(const RelationshipMatrix& matrix, const LabelAssignment& char_assignment,
                                      double min_prob = 0.5);

}  // namespace comicid
