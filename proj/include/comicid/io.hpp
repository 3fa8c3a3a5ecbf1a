#pragma once

// On-disk artifacts: documents, relationship scores, feature vectors, ground
// truth pairs, name maps and prediction dumps. Everything is UTF-8 JSON or
// JSON-lines; NaN/Infinity are rejected. Loaders report the offending
// line/record in every error.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "comicid/core.hpp"

namespace comicid::io {

inline constexpr const char* kFormatVersion = "1";

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

ComicDocument load_document(const std::filesystem::path& path);
void save_document(const ComicDocument& doc, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Relationship scores (JSON-lines {char_id, text_id, score})
// ---------------------------------------------------------------------------

enum class ScoreRange {
    UnitInterval,  // initial scores: (0, 1]
    Positive,      // rescored matrices: anything > 0
};

RelationshipMatrix load_scores(const std::filesystem::path& path, const ComicDocument& doc,
                               ScoreRange range = ScoreRange::UnitInterval);
void save_scores(const RelationshipMatrix& matrix, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ground-truth speaker pairs (JSON-lines {char_id, text_id})
// ---------------------------------------------------------------------------

GtPairs load_gt_pairs(const std::filesystem::path& path, const ComicDocument& doc);
void save_gt_pairs(const GtPairs& pairs, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Feature vectors (JSON-lines {char_id, vector:[...]}, uniform dimension)
// ---------------------------------------------------------------------------

FeatureTable load_features(const std::filesystem::path& path);
void save_features(const FeatureTable& features, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Name map: extracted name -> true name, or null for unmapped
// ---------------------------------------------------------------------------

using NameMap = std::map<std::string, std::optional<std::string>>;

NameMap load_name_map(const std::filesystem::path& path);
void save_name_map(const NameMap& map, const std::filesystem::path& path);

// Rewrites roster names through the map. Every roster name must be present as
// a key. Entries mapped to null are kept but flagged unmapped, so they can
// never match ground truth. Many-to-one mappings are allowed; evaluation
// treats the rewritten duplicates as one class.
NameRoster apply_name_map(const NameRoster& roster, const NameMap& map);

// ---------------------------------------------------------------------------
// Prediction dumps (JSON-lines {iteration, region_kind, region_id, name, confidence})
// ---------------------------------------------------------------------------

struct PredictionRecord {
    int iteration = 0;
    std::string region_kind;  // "text" | "char"
    std::string region_id;
    std::optional<Label> label;  // nullopt = ABSTAIN

    bool operator==(const PredictionRecord&) const = default;
};

void dump_predictions(const PipelineTrace& trace, const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// Folds loaded records back into per-iteration (text, char) assignments.
std::map<int, std::pair<LabelAssignment, LabelAssignment>> fold_predictions(
    const std::vector<PredictionRecord>& records);

}  // namespace comicid::io
