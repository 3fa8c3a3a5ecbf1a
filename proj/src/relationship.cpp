#include "comicid/relationship.hpp"

#include <algorithm>
#include <cmath>

namespace comicid {

RelationshipMatrix distance_scores(const ComicDocument& doc) {
    RelationshipMatrix matrix;
    for (const auto& c : doc.characters) {
        for (const auto& t : doc.texts) {
            if (c.page_index != t.page_index) continue;
            double dx = c.box.center_x() - t.box.center_x();
            double dy = c.box.center_y() - t.box.center_y();
            double dist = std::sqrt(dx * dx + dy * dy);
            matrix.set(c.id, t.id, 1.0 / (1.0 + dist));
        }
    }
    return matrix;
}

RelationshipMatrix gt_scores(const ComicDocument& doc, const GtPairs& pairs) {
    RelationshipMatrix matrix;
    for (const auto& [char_id, text_id] : pairs) {
        if (!doc.find_character(char_id)) throw ValidationError("gt pair references unknown char_id: " + char_id);
        if (!doc.find_text(text_id)) throw ValidationError("gt pair references unknown text_id: " + text_id);
        matrix.set(char_id, text_id, 1.0);
    }
    return matrix;
}

RelationshipMatrix rescore(const RelationshipMatrix& matrix, const LabelAssignment& char_assignment,
                           const LabelAssignment& text_assignment, const RescoreConfig& config) {
    if (!(config.lambda > 0.0)) throw ValidationError("rescore lambda must be positive");

    RelationshipMatrix out;
    for (const auto& [key, score] : matrix.entries()) {
        const auto& [char_id, text_id] = key;
        auto char_label = char_assignment.get(char_id);
        auto text_label = text_assignment.get(text_id);
        if (!char_label || !text_label) {
            out.set(char_id, text_id, score);
            continue;
        }
        double p = config.lambda * char_label->confidence.as_prob() * text_label->confidence.as_prob();
        double scale = config.mode == RescoreConfig::Mode::Intent ? std::max(1.0, p) : std::min(1.0, p);
        // a zero-probability label would zero the scale and delete the pair;
        // scores must stay positive and the sparsity pattern fixed
        scale = std::max(scale, 1e-12);
        bool match = char_label->name == text_label->name;
        double rescored = match ? score * scale : score / scale;
        out.set(char_id, text_id, rescored);
    }
    return out;
}

}  // namespace comicid
