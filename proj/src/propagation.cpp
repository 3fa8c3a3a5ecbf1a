#include "comicid/propagation.hpp"

namespace comicid {

PseudoLabelSet propagate_text_to_char(const RelationshipMatrix& matrix, const LabelAssignment& text_assignment,
                                      int min_level) {
    PseudoLabelSet out;
    for (const auto& char_id : matrix.char_ids()) {
        auto best = matrix.best_text_for_char(char_id);
        if (!best) continue;
        auto label = text_assignment.get(best->first);
        if (!label) continue;  // ABSTAIN winner suppresses the region
        // text-side confidences are levels; a probability-valued label is
        // compared on the same level/5 scale
        bool passes = label->confidence.is_level() ? label->confidence.level_value() >= min_level
                                                   : label->confidence.as_prob() >= static_cast<double>(min_level) / 5.0;
        if (!passes) continue;
        out[char_id] = PseudoLabel{label->name, best->first, label->confidence};
    }
    return out;
}

PseudoLabelSet propagate_char_to_text(const RelationshipMatrix& matrix, const LabelAssignment& char_assignment,
                                      double min_prob) {
    PseudoLabelSet out;
    for (const auto& text_id : matrix.text_ids()) {
        auto best = matrix.best_char_for_text(text_id);
        if (!best) continue;
        auto label = char_assignment.get(best->first);
        if (!label) continue;
        if (label->confidence.as_prob() < min_prob) continue;
        out[text_id] = PseudoLabel{label->name, best->first, label->confidence};
    }
    return out;
}

}  // namespace comicid
