#pragma once

// Metrics and evaluation protocols: label accuracies (ABSTAIN counts as
// wrong), pseudo-label precision/recall, relationship accuracy, the
// Easy/Hard title split, IoU-matched zero-shot scoring and the extraction
// upper bound, plus report rendering.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "comicid/core.hpp"
#include "comicid/io.hpp"

namespace comicid::eval {

// correct / |ground truth universe|; missing or ABSTAIN predictions are wrong.
double label_accuracy(const LabelAssignment& assignment, const std::map<std::string, std::string>& ground_truth);

// precision = correct/emitted (0 with no_emissions flag when nothing was
// emitted), recall = correct/|universe|. The accuracy field repeats the
// precision ratio; pass the unthresholded pseudo set to measure quality
// before filtering.
PseudoQuality pseudo_label_quality(const PseudoLabelSet& pseudo, const std::map<std::string, std::string>& ground_truth,
                                   const std::set<std::string>& universe);

// Per annotated text: argmax character equals the annotated speaker region.
// Texts without any scored pair count as wrong.
double relationship_accuracy(const RelationshipMatrix& matrix, const GtPairs& gt_pairs);

struct SplitResult {
    std::vector<std::string> easy;  // strictly above the threshold
    std::vector<std::string> hard;
};

SplitResult easy_hard_split(const std::map<std::string, double>& per_title_relationship_accuracy,
                            double threshold = 0.75);

double iou(const BoundingBox& a, const BoundingBox& b);

// Region predictions for detection-aware scoring; name is nullopt for ABSTAIN.
struct RegionPrediction {
    BoundingBox box;
    std::optional<std::string> name;
};

struct ZeroShotResult {
    size_t gt_total = 0;
    size_t matched = 0;  // one-to-one matches above the IoU threshold
    size_t correct = 0;  // matched and correctly labeled
    double accuracy = 0.0;
};

// Greedy one-to-one matching by descending IoU among pairs with IoU strictly
// above the threshold. Prediction names pass through the name map when given
// (null-mapped names can never match). Accuracy divides by the ground-truth
// region count.
ZeroShotResult zero_shot_score(const std::vector<RegionPrediction>& predictions,
                               const std::vector<RegionPrediction>& ground_truth, double iou_threshold = 0.5,
                               const io::NameMap* name_map = nullptr);

// Fraction of ground-truth regions whose true name was extracted (unmapped
// roster entries never count).
double upper_bound(const NameRoster& extracted_roster, const std::vector<std::string>& gt_region_names);

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

// Plain-text per-iteration accuracy table (columns: speaker pred, character id).
std::string render_iteration_table(const std::vector<MetricSnapshot>& snapshots);

// Cross-title comparison: one block per split with per-iteration mean
// accuracies. `titles` maps title -> per-iteration snapshots.
std::string render_split_table(const std::map<std::string, std::vector<MetricSnapshot>>& titles,
                               const SplitResult& split);

// SVG overlay of one page: character and text boxes with predicted labels.
std::string render_page_svg(const ComicDocument& doc, int page_index, const LabelAssignment& char_assignment,
                            const LabelAssignment& text_assignment);

}  // namespace comicid::eval
