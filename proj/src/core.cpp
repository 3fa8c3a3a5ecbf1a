#include "comicid/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace comicid {

void validate_box(const BoundingBox& box, const std::string& where) {
    auto bad = [&](const std::string& what) {
        throw ValidationError(where + ": invalid box [" + std::to_string(box.x1) + "," + std::to_string(box.y1) + "," +
                              std::to_string(box.x2) + "," + std::to_string(box.y2) + "]: " + what);
    };
    for (double v : {box.x1, box.y1, box.x2, box.y2}) {
        if (!std::isfinite(v)) bad("non-finite coordinate");
        if (v < 0.0) bad("negative coordinate");
    }
    if (!(box.x1 < box.x2)) bad("x1 >= x2");
    if (!(box.y1 < box.y2)) bad("y1 >= y2");
}

// ---------------------------------------------------------------------------
// NameRoster
// ---------------------------------------------------------------------------

NameRoster NameRoster::from_names(const std::vector<std::string>& names) {
    if (names.size() > 26) throw ValidationError("roster exceeds 26 entries; ids are single letters A..Z");
    NameRoster roster;
    std::set<std::string> seen;
    for (size_t i = 0; i < names.size(); ++i) {
        const std::string& name = names[i];
        if (name.empty()) throw ValidationError("roster name at position " + std::to_string(i) + " is empty");
        if (!seen.insert(name).second) throw ValidationError("duplicate roster name: " + name);
        roster.entries_.push_back({std::string(1, static_cast<char>('A' + i)), name, false});
    }
    return roster;
}

NameRoster NameRoster::from_entries(std::vector<RosterEntry> entries) {
    std::set<std::string> ids;
    for (const auto& e : entries) {
        if (e.name.empty()) throw ValidationError("roster entry " + e.char_id + " has empty name");
        if (!ids.insert(e.char_id).second) throw ValidationError("duplicate roster id: " + e.char_id);
    }
    NameRoster roster;
    roster.entries_ = std::move(entries);
    return roster;
}

const RosterEntry* NameRoster::find_id(const std::string& char_id) const {
    for (const auto& e : entries_)
        if (e.char_id == char_id) return &e;
    return nullptr;
}

const RosterEntry* NameRoster::find_name(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

// ---------------------------------------------------------------------------
// RelationshipMatrix
// ---------------------------------------------------------------------------

void RelationshipMatrix::set(const std::string& char_id, const std::string& text_id, double score) {
    if (!(score > 0.0) || !std::isfinite(score))
        throw ValidationError("relationship score for (" + char_id + "," + text_id + ") must be positive and finite");
    entries_[{char_id, text_id}] = score;
}

double RelationshipMatrix::get(const std::string& char_id, const std::string& text_id) const {
    auto it = entries_.find({char_id, text_id});
    return it == entries_.end() ? 0.0 : it->second;
}

bool RelationshipMatrix::contains(const std::string& char_id, const std::string& text_id) const {
    return entries_.count({char_id, text_id}) > 0;
}

std::optional<std::pair<std::string, double>> RelationshipMatrix::best_text_for_char(const std::string& char_id) const {
    std::optional<std::pair<std::string, double>> best;
    // map iteration is ordered by (char_id, text_id), so strict > keeps the
    // lexicographically smallest text id on score ties
    for (auto it = entries_.lower_bound({char_id, std::string()}); it != entries_.end() && it->first.first == char_id; ++it) {
        if (!best || it->second > best->second) best = {it->first.second, it->second};
    }
    return best;
}

std::optional<std::pair<std::string, double>> RelationshipMatrix::best_char_for_text(const std::string& text_id) const {
    std::optional<std::pair<std::string, double>> best;
    // entries are sorted by char id first, so strict > again favors the
    // lexicographically smallest char id on ties
    for (const auto& [key, score] : entries_) {
        if (key.second != text_id) continue;
        if (!best || score > best->second) best = {key.first, score};
    }
    return best;
}

std::set<std::string> RelationshipMatrix::char_ids() const {
    std::set<std::string> out;
    for (const auto& [key, score] : entries_) out.insert(key.first);
    return out;
}

std::set<std::string> RelationshipMatrix::text_ids() const {
    std::set<std::string> out;
    for (const auto& [key, score] : entries_) out.insert(key.second);
    return out;
}

// ---------------------------------------------------------------------------
// ComicDocument
// ---------------------------------------------------------------------------

const CharacterRegion* ComicDocument::find_character(const std::string& id) const {
    for (const auto& c : characters)
        if (c.id == id) return &c;
    return nullptr;
}

const TextRegion* ComicDocument::find_text(const std::string& id) const {
    for (const auto& t : texts)
        if (t.id == id) return &t;
    return nullptr;
}

bool ComicDocument::all_texts_have_gt() const {
    return std::all_of(texts.begin(), texts.end(), [](const TextRegion& t) { return t.gt_label.has_value(); });
}

bool ComicDocument::has_any_gt() const {
    for (const auto& c : characters)
        if (c.gt_label) return true;
    for (const auto& t : texts)
        if (t.gt_label) return true;
    return false;
}

void validate_document(const ComicDocument& doc) {
    std::set<int> page_indices;
    for (const auto& page : doc.pages) {
        if (page.index < 0) throw ValidationError("page index must be >= 0, got " + std::to_string(page.index));
        if (!page_indices.insert(page.index).second)
            throw ValidationError("duplicate page index " + std::to_string(page.index));
        if (!(page.width > 0.0) || !(page.height > 0.0))
            throw ValidationError("page " + std::to_string(page.index) + " has non-positive size");
    }

    std::set<std::string> char_ids;
    for (const auto& c : doc.characters) {
        if (c.id.empty()) throw ValidationError("character region with empty id");
        if (!char_ids.insert(c.id).second) throw ValidationError("duplicate character region id: " + c.id);
        if (!page_indices.count(c.page_index))
            throw ValidationError("character " + c.id + " references unknown page " + std::to_string(c.page_index));
        validate_box(c.box, "character " + c.id);
    }

    std::set<std::string> text_ids;
    std::set<std::pair<int, int>> order_keys;
    for (const auto& t : doc.texts) {
        if (t.id.empty()) throw ValidationError("text region with empty id");
        if (!text_ids.insert(t.id).second) throw ValidationError("duplicate text region id: " + t.id);
        if (!page_indices.count(t.page_index))
            throw ValidationError("text " + t.id + " references unknown page " + std::to_string(t.page_index));
        validate_box(t.box, "text " + t.id);
        if (!order_keys.insert({t.page_index, t.order}).second)
            throw ValidationError("duplicate reading-order key (page " + std::to_string(t.page_index) + ", order " +
                                  std::to_string(t.order) + ") at text " + t.id);
    }
}

std::vector<std::string> reading_order(const ComicDocument& doc) {
    std::set<std::pair<int, int>> order_keys;
    for (const auto& t : doc.texts) {
        if (!order_keys.insert({t.page_index, t.order}).second)
            throw ValidationError("duplicate reading-order key (page " + std::to_string(t.page_index) + ", order " +
                                  std::to_string(t.order) + ") at text " + t.id);
    }
    std::vector<const TextRegion*> sorted;
    sorted.reserve(doc.texts.size());
    for (const auto& t : doc.texts) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](const TextRegion* a, const TextRegion* b) {
        if (a->page_index != b->page_index) return a->page_index < b->page_index;
        if (a->order != b->order) return a->order < b->order;
        return a->id < b->id;
    });
    std::vector<std::string> ids;
    ids.reserve(sorted.size());
    for (const auto* t : sorted) ids.push_back(t->id);
    return ids;
}

std::map<std::string, std::string> text_gt_labels(const ComicDocument& doc) {
    std::map<std::string, std::string> out;
    for (const auto& t : doc.texts)
        if (t.gt_label) out[t.id] = *t.gt_label;
    return out;
}

std::map<std::string, std::string> char_gt_labels(const ComicDocument& doc) {
    std::map<std::string, std::string> out;
    for (const auto& c : doc.characters)
        if (c.gt_label) out[c.id] = *c.gt_label;
    return out;
}

}  // namespace comicid
