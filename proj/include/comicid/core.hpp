#pragma once

// Shared domain model: regions, rosters, label assignments, confidences,
// relationship matrices and the per-iteration pipeline trace. All types are
// immutable values after construction; pipeline stages communicate by
// building new snapshots.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comicid/errors.hpp"

namespace comicid {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }

    bool operator==(const BoundingBox&) const = default;
};

// Throws ValidationError unless x1 < x2, y1 < y2, all coordinates finite and >= 0.
void validate_box(const BoundingBox& box, const std::string& where);

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

struct CharacterRegion {
    std::string id;
    int page_index = 0;
    BoundingBox box;
    std::optional<std::string> gt_label;

    bool operator==(const CharacterRegion&) const = default;
};

struct TextRegion {
    std::string id;
    int page_index = 0;
    BoundingBox box;
    std::string text;
    int order = 0;  // reading-order key within the page
    std::optional<std::string> gt_label;

    bool operator==(const TextRegion&) const = default;
};

struct PageInfo {
    int index = 0;
    double width = 0.0;
    double height = 0.0;

    bool operator==(const PageInfo&) const = default;
};

// ---------------------------------------------------------------------------
// Roster
// ---------------------------------------------------------------------------

struct RosterEntry {
    std::string char_id;  // single letter, "A", "B", ...
    std::string name;
    // Set by apply_name_map for entries mapped to null: the entry stays in the
    // label space but can never match ground truth during evaluation.
    bool unmapped = false;

    bool operator==(const RosterEntry&) const = default;
};

class NameRoster {
public:
    NameRoster() = default;

    // Assigns ids A, B, ... in order. Throws ValidationError on duplicate or
    // empty names, or more than 26 entries (ids are single letters).
    static NameRoster from_names(const std::vector<std::string>& names);

    // Direct construction path for apply_name_map, which may legitimately
    // produce duplicate names (many-to-one manual mappings).
    static NameRoster from_entries(std::vector<RosterEntry> entries);

    const std::vector<RosterEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const RosterEntry* find_id(const std::string& char_id) const;
    const RosterEntry* find_name(const std::string& name) const;
    bool contains_name(const std::string& name) const { return find_name(name) != nullptr; }

    bool operator==(const NameRoster&) const = default;

private:
    std::vector<RosterEntry> entries_;
};

// ---------------------------------------------------------------------------
// Confidence: either an LLM confidence level (1..5) or a classifier
// probability in [0,1]. The two scales are kept apart; level/5 conversion
// happens only where a probability is explicitly required (rescoring).
// ---------------------------------------------------------------------------

class Confidence {
public:
    static Confidence level(int value) {
        if (value < 1 || value > 5) throw ValidationError("confidence level out of range 1..5: " + std::to_string(value));
        Confidence c;
        c.is_level_ = true;
        c.level_ = value;
        return c;
    }

    static Confidence prob(double value) {
        if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("confidence probability out of range [0,1]");
        Confidence c;
        c.is_level_ = false;
        c.prob_ = value;
        return c;
    }

    bool is_level() const { return is_level_; }
    int level_value() const {
        if (!is_level_) throw InternalError("confidence is not a level");
        return level_;
    }
    double prob_value() const {
        if (is_level_) throw InternalError("confidence is not a probability");
        return prob_;
    }

    // Probability view: levels map monotonically onto [0,1] as level/5.
    double as_prob() const { return is_level_ ? static_cast<double>(level_) / 5.0 : prob_; }

    bool operator==(const Confidence&) const = default;

private:
    bool is_level_ = false;
    int level_ = 1;
    double prob_ = 0.0;
};

struct Label {
    std::string name;
    Confidence confidence;

    bool operator==(const Label&) const = default;
};

// Per-region predicted label. ABSTAIN is an explicit state (stored entry with
// no label) so that confidence thresholding stays observable.
class LabelAssignment {
public:
    void set(const std::string& region_id, Label label) { entries_[region_id] = std::move(label); }
    void set_abstain(const std::string& region_id) { entries_[region_id] = std::nullopt; }

    bool contains(const std::string& region_id) const { return entries_.count(region_id) > 0; }

    // nullopt when the region is ABSTAIN or absent.
    std::optional<Label> get(const std::string& region_id) const {
        auto it = entries_.find(region_id);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<std::string, std::optional<Label>>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    size_t labeled_count() const {
        size_t n = 0;
        for (const auto& [id, label] : entries_)
            if (label) ++n;
        return n;
    }

    bool operator==(const LabelAssignment&) const = default;

private:
    std::map<std::string, std::optional<Label>> entries_;
};

// ---------------------------------------------------------------------------
// Relationship matrix: sparse positive scores over (character, text) pairs.
// Absent pairs mean score 0. Initial scorers stay within (0,1]; rescoring may
// push scores above 1, only relative order per region is meaningful.
// ---------------------------------------------------------------------------

class RelationshipMatrix {
public:
    using Key = std::pair<std::string, std::string>;  // (char_id, text_id)

    void set(const std::string& char_id, const std::string& text_id, double score);
    double get(const std::string& char_id, const std::string& text_id) const;
    bool contains(const std::string& char_id, const std::string& text_id) const;

    const std::map<Key, double>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Highest-scored partner; ties resolved toward the lexicographically
    // smaller id. nullopt when the region has no scored pair.
    std::optional<std::pair<std::string, double>> best_text_for_char(const std::string& char_id) const;
    std::optional<std::pair<std::string, double>> best_char_for_text(const std::string& text_id) const;

    std::set<std::string> char_ids() const;
    std::set<std::string> text_ids() const;

    bool operator==(const RelationshipMatrix&) const = default;

private:
    std::map<Key, double> entries_;
};

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

struct ComicDocument {
    std::string title;
    std::vector<PageInfo> pages;
    std::vector<CharacterRegion> characters;
    std::vector<TextRegion> texts;
    NameRoster roster;  // may be empty; extraction happens downstream

    const CharacterRegion* find_character(const std::string& id) const;
    const TextRegion* find_text(const std::string& id) const;

    bool all_texts_have_gt() const;
    bool has_any_gt() const;

    bool operator==(const ComicDocument&) const = default;
};

// Full invariant check; throws ValidationError with the offending locus.
void validate_document(const ComicDocument& doc);

// Text ids sorted by (page_index, order); duplicate order keys are a
// validation error, so the ordering is total.
std::vector<std::string> reading_order(const ComicDocument& doc);

// Ground-truth views used by evaluation.
std::map<std::string, std::string> text_gt_labels(const ComicDocument& doc);
std::map<std::string, std::string> char_gt_labels(const ComicDocument& doc);

// ---------------------------------------------------------------------------
// Pseudo labels (outputs of the propagation operators)
// ---------------------------------------------------------------------------

struct PseudoLabel {
    std::string name;
    std::string source_region_id;
    Confidence source_confidence;

    bool operator==(const PseudoLabel&) const = default;
};

// target region id -> propagated label
using PseudoLabelSet = std::map<std::string, PseudoLabel>;

// ---------------------------------------------------------------------------
// Metrics snapshot (filled by the evaluation module; plain data here so the
// trace can carry it without depending on evaluation)
// ---------------------------------------------------------------------------

struct PseudoQuality {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;  // precision of the unthresholded set when supplied
    size_t emitted = 0;
    size_t correct = 0;
    bool no_emissions = false;  // precision reported as 0 with this flag set

    bool operator==(const PseudoQuality&) const = default;
};

struct MetricSnapshot {
    std::optional<double> speaker_accuracy;
    std::optional<double> character_accuracy;
    std::optional<double> relationship_accuracy;
    std::optional<PseudoQuality> pseudo_tc;
    std::optional<PseudoQuality> pseudo_ct;

    bool operator==(const MetricSnapshot&) const = default;
};

// ---------------------------------------------------------------------------
// Pipeline trace
// ---------------------------------------------------------------------------

struct IterationRecord {
    int iteration = 0;
    LabelAssignment text_assignment;
    LabelAssignment char_assignment;
    PseudoLabelSet pseudo_tc;
    PseudoLabelSet pseudo_ct;
    RelationshipMatrix scores;  // matrix after this iteration's rescorings (initial at iteration 0)
    MetricSnapshot metrics;

    bool operator==(const IterationRecord&) const = default;
};

struct PipelineTrace {
    std::vector<IterationRecord> iterations;  // indices contiguous from 0

    const IterationRecord& last() const {
        if (iterations.empty()) throw InternalError("empty pipeline trace");
        return iterations.back();
    }

    bool operator==(const PipelineTrace&) const = default;
};

// ---------------------------------------------------------------------------
// Feature vectors (stand-in for learned image embeddings)
// ---------------------------------------------------------------------------

// character region id -> fixed-dimension feature vector
using FeatureTable = std::map<std::string, std::vector<double>>;

// (char_id, text_id) ground-truth speaker pairs
using GtPairs = std::set<std::pair<std::string, std::string>>;

}  // namespace comicid
