#pragma once

// Initial relationship scorers (distance- and ground-truth-based; externally
// produced scores arrive via corpus files) and the label-agreement rescoring
// rule applied between pipeline steps.

#include "comicid/core.hpp"

namespace comicid {

struct RescoreConfig {
    // Intent: scale a = max(1, lambda*p_x*p_y); multiply on label match,
    //         divide on mismatch, so agreement never lowers a score.
    // Literal: scale s = min(1, lambda*p_x*p_y) applied the same way. With
    //          s < 1 a match lowers the score; kept behind this switch for
    //          comparison because the two readings genuinely disagree.
    enum class Mode { Intent, Literal };

    double lambda = 2.0;
    Mode mode = Mode::Intent;
};

// Same-page (character, text) pairs scored by 1/(1+d) where d is the distance
// between box centers. The +1 keeps coincident centers finite; rank order per
// text matches the plain reciprocal.
RelationshipMatrix distance_scores(const ComicDocument& doc);

// Score 1.0 for every annotated speaker pair, nothing else.
RelationshipMatrix gt_scores(const ComicDocument& doc, const GtPairs& pairs);

// Rescores every pair whose regions both carry a non-ABSTAIN label; pairs
// touching an ABSTAIN side are left unchanged. Level confidences enter the
// scale as level/5. Sparsity is preserved and nothing is renormalized.
RelationshipMatrix rescore(const RelationshipMatrix& matrix, const LabelAssignment& char_assignment,
                           const LabelAssignment& text_assignment, const RescoreConfig& config);

}  // namespace comicid
