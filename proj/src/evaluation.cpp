#include "comicid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace comicid::eval {

double label_accuracy(const LabelAssignment& assignment, const std::map<std::string, std::string>& ground_truth) {
    if (ground_truth.empty()) throw ValidationError("label accuracy over an empty ground-truth universe");
    size_t correct = 0;
    for (const auto& [region_id, gt_name] : ground_truth) {
        auto label = assignment.get(region_id);
        if (label && label->name == gt_name) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ground_truth.size());
}

PseudoQuality pseudo_label_quality(const PseudoLabelSet& pseudo, const std::map<std::string, std::string>& ground_truth,
                                   const std::set<std::string>& universe) {
    if (universe.empty()) throw ValidationError("pseudo-label quality over an empty universe");
    for (const auto& [region_id, label] : pseudo)
        if (!universe.count(region_id))
            throw ValidationError("pseudo label for region outside the universe: " + region_id);

    PseudoQuality q;
    q.emitted = pseudo.size();
    for (const auto& [region_id, label] : pseudo) {
        auto it = ground_truth.find(region_id);
        if (it != ground_truth.end() && it->second == label.name) ++q.correct;
    }
    if (q.emitted == 0) {
        q.no_emissions = true;
        q.precision = 0.0;
        q.accuracy = 0.0;
    } else {
        q.precision = static_cast<double>(q.correct) / static_cast<double>(q.emitted);
        q.accuracy = q.precision;
    }
    q.recall = static_cast<double>(q.correct) / static_cast<double>(universe.size());
    return q;
}

double relationship_accuracy(const RelationshipMatrix& matrix, const GtPairs& gt_pairs) {
    if (gt_pairs.empty()) throw ValidationError("relationship accuracy requires ground-truth pairs");
    std::set<std::string> gt_texts;
    for (const auto& [char_id, text_id] : gt_pairs) gt_texts.insert(text_id);
    size_t correct = 0;
    for (const auto& text_id : gt_texts) {
        auto best = matrix.best_char_for_text(text_id);
        if (!best) continue;  // unscored text counts as wrong
        if (gt_pairs.count({best->first, text_id})) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gt_texts.size());
}

SplitResult easy_hard_split(const std::map<std::string, double>& per_title_relationship_accuracy, double threshold) {
    if (per_title_relationship_accuracy.empty()) throw ValidationError("easy/hard split requires at least one title");
    SplitResult result;
    for (const auto& [title, accuracy] : per_title_relationship_accuracy) {
        if (accuracy > threshold)
            result.easy.push_back(title);
        else
            result.hard.push_back(title);
    }
    return result;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    double ix1 = std::max(a.x1, b.x1);
    double iy1 = std::max(a.y1, b.y1);
    double ix2 = std::min(a.x2, b.x2);
    double iy2 = std::min(a.y2, b.y2);
    double iw = std::max(0.0, ix2 - ix1);
    double ih = std::max(0.0, iy2 - iy1);
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

ZeroShotResult zero_shot_score(const std::vector<RegionPrediction>& predictions,
                               const std::vector<RegionPrediction>& ground_truth, double iou_threshold,
                               const io::NameMap* name_map) {
    ZeroShotResult result;
    result.gt_total = ground_truth.size();
    if (ground_truth.empty()) return result;

    struct Pair {
        double overlap;
        size_t pred;
        size_t gt;
    };
    std::vector<Pair> pairs;
    for (size_t p = 0; p < predictions.size(); ++p) {
        for (size_t g = 0; g < ground_truth.size(); ++g) {
            double overlap = iou(predictions[p].box, ground_truth[g].box);
            if (overlap > iou_threshold) pairs.push_back({overlap, p, g});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gt < b.gt;
    });

    std::vector<bool> pred_used(predictions.size(), false);
    std::vector<bool> gt_used(ground_truth.size(), false);
    for (const auto& pair : pairs) {
        if (pred_used[pair.pred] || gt_used[pair.gt]) continue;
        pred_used[pair.pred] = true;
        gt_used[pair.gt] = true;
        ++result.matched;

        const auto& pred_name = predictions[pair.pred].name;
        const auto& gt_name = ground_truth[pair.gt].name;
        if (!pred_name || !gt_name) continue;
        std::optional<std::string> effective = pred_name;
        if (name_map) {
            auto it = name_map->find(*pred_name);
            if (it != name_map->end()) effective = it->second;  // null mapping can never match
        }
        if (effective && *effective == *gt_name) ++result.correct;
    }
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.gt_total);
    return result;
}

double upper_bound(const NameRoster& extracted_roster, const std::vector<std::string>& gt_region_names) {
    if (gt_region_names.empty()) throw ValidationError("upper bound over an empty region set");
    std::set<std::string> covered;
    for (const auto& e : extracted_roster.entries())
        if (!e.unmapped) covered.insert(e.name);
    size_t hit = 0;
    for (const auto& name : gt_region_names)
        if (covered.count(name)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(gt_region_names.size());
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string pct(const std::optional<double>& value) {
    if (!value) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *value * 100.0);
    return buf;
}

}  // namespace

std::string render_iteration_table(const std::vector<MetricSnapshot>& snapshots) {
    std::ostringstream out;
    out << "iter | speaker pred. | character id.\n";
    out << "-----+---------------+--------------\n";
    for (size_t i = 0; i < snapshots.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "%4zu | %13s | %13s\n", i, pct(snapshots[i].speaker_accuracy).c_str(),
                      pct(snapshots[i].character_accuracy).c_str());
        out << line;
    }
    return out.str();
}

namespace {

std::optional<double> mean_metric(const std::map<std::string, std::vector<MetricSnapshot>>& titles,
                                  const std::vector<std::string>& members, size_t iteration, bool speaker) {
    double total = 0.0;
    size_t count = 0;
    for (const auto& title : members) {
        auto it = titles.find(title);
        if (it == titles.end() || iteration >= it->second.size()) continue;
        const auto& value = speaker ? it->second[iteration].speaker_accuracy : it->second[iteration].character_accuracy;
        if (!value) continue;
        total += *value;
        ++count;
    }
    if (count == 0) return std::nullopt;
    return total / static_cast<double>(count);
}

}  // namespace

std::string render_split_table(const std::map<std::string, std::vector<MetricSnapshot>>& titles,
                               const SplitResult& split) {
    size_t max_iters = 0;
    for (const auto& [title, snaps] : titles) max_iters = std::max(max_iters, snaps.size());

    std::vector<std::string> all;
    for (const auto& [title, snaps] : titles) all.push_back(title);

    std::ostringstream out;
    out << "     |        Speaker pred.        |        Character id.\n";
    out << "iter |  Easy |  Hard | Total       |  Easy |  Hard | Total\n";
    out << "-----+-------+-------+-------------+-------+-------+------\n";
    for (size_t i = 0; i < max_iters; ++i) {
        char line[160];
        std::snprintf(line, sizeof(line), "%4zu | %5s | %5s | %5s       | %5s | %5s | %5s\n", i,
                      pct(mean_metric(titles, split.easy, i, true)).c_str(),
                      pct(mean_metric(titles, split.hard, i, true)).c_str(),
                      pct(mean_metric(titles, all, i, true)).c_str(),
                      pct(mean_metric(titles, split.easy, i, false)).c_str(),
                      pct(mean_metric(titles, split.hard, i, false)).c_str(),
                      pct(mean_metric(titles, all, i, false)).c_str());
        out << line;
    }
    return out.str();
}

namespace {

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

const char* kPalette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                          "#42d4f4", "#f032e6", "#bfef45", "#469990", "#9a6324"};

}  // namespace

std::string render_page_svg(const ComicDocument& doc, int page_index, const LabelAssignment& char_assignment,
                            const LabelAssignment& text_assignment) {
    const PageInfo* page = nullptr;
    for (const auto& p : doc.pages)
        if (p.index == page_index) page = &p;
    if (!page) throw ValidationError("unknown page index " + std::to_string(page_index));

    std::map<std::string, size_t> color_for_name;
    auto color = [&](const std::string& name) {
        auto [it, inserted] = color_for_name.try_emplace(name, color_for_name.size());
        return kPalette[it->second % (sizeof(kPalette) / sizeof(kPalette[0]))];
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << page->width << "\" height=\"" << page->height
        << "\" viewBox=\"0 0 " << page->width << " " << page->height << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    auto draw = [&](const std::string& id, const BoundingBox& box, const LabelAssignment& assignment, bool dashed) {
        auto label = assignment.get(id);
        std::string name = label ? label->name : "?";
        std::string stroke = label ? color(name) : "#999999";
        out << "  <rect x=\"" << box.x1 << "\" y=\"" << box.y1 << "\" width=\"" << box.width() << "\" height=\""
            << box.height() << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"3\""
            << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        out << "  <text x=\"" << box.x1 + 2 << "\" y=\"" << std::max(12.0, box.y1 - 4) << "\" font-size=\"14\" fill=\""
            << stroke << "\">" << svg_escape(name) << "</text>\n";
    };

    for (const auto& c : doc.characters)
        if (c.page_index == page_index) draw(c.id, c.box, char_assignment, false);
    for (const auto& t : doc.texts)
        if (t.page_index == page_index) draw(t.id, t.box, text_assignment, true);

    out << "</svg>\n";
    return out.str();
}

}  // namespace comicid::eval
