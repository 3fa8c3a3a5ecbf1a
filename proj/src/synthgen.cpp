#include "comicid/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "comicid/evaluation.hpp"
#include "comicid/relationship.hpp"
#include "comicid/rng.hpp"

namespace comicid::synth {

namespace {

constexpr double kPageWidth = 800.0;
constexpr double kPageHeight = 1190.0;
constexpr int kGridCols = 5;
constexpr int kGridRows = 7;
constexpr double kCellWidth = kPageWidth / kGridCols;
constexpr double kCellHeight = kPageHeight / kGridRows;
constexpr double kCharBoxWidth = 100.0;
constexpr double kCharBoxHeight = 140.0;
constexpr double kTextBoxWidth = 120.0;
constexpr double kTextBoxHeight = 70.0;

const char* kNamePool[] = {
    "Aiko", "Banri", "Chiyo", "Daigo", "Emiko", "Fuyuko", "Goro", "Hana", "Isao", "Junko", "Kenta", "Lina", "Momo",
    "Nobu", "Orin", "Petra", "Quon", "Rinka", "Sota", "Tomoe", "Ume", "Vera", "Wataru", "Xan", "Yuzu", "Zenji",
};

// fillers deliberately avoid every pool name
const char* kFillers[] = {
    "we should keep moving before the sun goes down.",
    "did you hear that noise from the other room?",
    "this place has changed so much since last spring.",
    "I can't believe you actually did it.",
    "hold on, let me check the map again.",
    "the festival starts tomorrow and nothing is ready.",
    "stop joking around, this is serious.",
    "something about this town feels wrong today.",
    "fine, but you owe me lunch after this.",
    "I'll take the first watch tonight.",
    "there has to be another way across the river.",
    "whatever happens, stay close to me.",
};

struct Placement {
    double cx;
    double cy;
    BoundingBox box;
};

Placement place_in_cell(int cell, double box_w, double box_h, Rng& rng) {
    int col = cell % kGridCols;
    int row = cell / kGridCols;
    double slack_x = kCellWidth - box_w;
    double slack_y = kCellHeight - box_h;
    double x1 = col * kCellWidth + rng.next_double() * slack_x;
    double y1 = row * kCellHeight + rng.next_double() * slack_y;
    BoundingBox box{x1, y1, x1 + box_w, y1 + box_h};
    return {box.center_x(), box.center_y(), box};
}

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
    if (config.roster_size < 2 || config.roster_size > 26)
        throw ValidationError("roster_size must be in 2..26");
    if (config.num_pages < 1) throw ValidationError("num_pages must be >= 1");
    if (config.chars_per_page < 1) throw ValidationError("chars_per_page must be >= 1");
    if (config.texts_per_page < 0) throw ValidationError("texts_per_page must be >= 0");
    if (config.feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
    if (config.name_mention_prob < 0.0 || config.name_mention_prob > 1.0)
        throw ValidationError("name_mention_prob must be in [0,1]");
    if (config.nearest_speaker_prob < 0.0 || config.nearest_speaker_prob > 1.0)
        throw ValidationError("nearest_speaker_prob must be in [0,1]");
    if (config.chars_per_page + config.texts_per_page > kGridCols * kGridRows)
        throw ValidationError("infeasible layout: " + std::to_string(config.chars_per_page + config.texts_per_page) +
                              " boxes per page exceed the " + std::to_string(kGridCols * kGridRows) + "-cell grid");

    Rng rng(derive_seed(config.seed, "synth-corpus"));

    std::vector<std::string> roster_names(kNamePool, kNamePool + config.roster_size);

    // per-character feature cluster centers
    Rng center_rng(derive_seed(config.seed, "synth-centers"));
    std::map<std::string, std::vector<double>> centers;
    for (const auto& name : roster_names) {
        std::vector<double> center(static_cast<size_t>(config.feature_dim));
        for (double& v : center) v = config.cluster_sep * center_rng.next_normal();
        centers[name] = center;
    }

    SynthCorpus corpus;
    corpus.document.title = config.title;
    corpus.document.roster = NameRoster::from_names(roster_names);

    int char_counter = 0;
    int text_counter = 0;

    for (int page = 0; page < config.num_pages; ++page) {
        corpus.document.pages.push_back({page, kPageWidth, kPageHeight});

        // page cast: shuffled roster, cycling when the page needs more regions
        std::vector<std::string> cast_pool = roster_names;
        rng.shuffle(cast_pool);
        std::vector<std::string> cast;
        for (int i = 0; i < config.chars_per_page; ++i) cast.push_back(cast_pool[i % cast_pool.size()]);

        std::vector<int> cells(kGridCols * kGridRows);
        for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
        rng.shuffle(cells);

        struct PlacedChar {
            std::string id;
            std::string name;
            Placement placement;
        };
        std::vector<PlacedChar> page_chars;
        for (int i = 0; i < config.chars_per_page; ++i) {
            Placement placement = place_in_cell(cells[static_cast<size_t>(i)], kCharBoxWidth, kCharBoxHeight, rng);
            std::string id = "c" + std::to_string(char_counter++);
            page_chars.push_back({id, cast[static_cast<size_t>(i)], placement});
            CharacterRegion region;
            region.id = id;
            region.page_index = page;
            region.box = placement.box;
            region.gt_label = cast[static_cast<size_t>(i)];
            corpus.document.characters.push_back(std::move(region));
        }

        struct PlacedText {
            Placement placement;
            size_t speaker;  // index into page_chars
            std::string dialogue;
        };
        std::vector<PlacedText> page_texts;
        for (int i = 0; i < config.texts_per_page; ++i) {
            Placement placement =
                place_in_cell(cells[static_cast<size_t>(config.chars_per_page + i)], kTextBoxWidth, kTextBoxHeight, rng);

            // nearest character by center distance; ties by smaller region id,
            // matching the distance scorer's argmax
            size_t nearest = 0;
            double nearest_dist = std::numeric_limits<double>::infinity();
            for (size_t c = 0; c < page_chars.size(); ++c) {
                double dx = page_chars[c].placement.cx - placement.cx;
                double dy = page_chars[c].placement.cy - placement.cy;
                double dist = std::sqrt(dx * dx + dy * dy);
                if (dist < nearest_dist || (dist == nearest_dist && page_chars[c].id < page_chars[nearest].id)) {
                    nearest_dist = dist;
                    nearest = c;
                }
            }

            double u_speaker = rng.next_double();
            uint64_t far_pick = rng.next_u64();
            double u_mention = rng.next_double();
            uint64_t addressee_pick = rng.next_u64();
            uint64_t filler_pick = rng.next_u64();

            size_t speaker = nearest;
            if (u_speaker >= config.nearest_speaker_prob && page_chars.size() > 1) {
                std::vector<size_t> others;
                for (size_t c = 0; c < page_chars.size(); ++c)
                    if (c != nearest) others.push_back(c);
                speaker = others[far_pick % others.size()];
            }

            std::string filler = kFillers[filler_pick % (sizeof(kFillers) / sizeof(kFillers[0]))];
            std::string dialogue;
            if (u_mention < config.name_mention_prob) {
                // address another character, preferably one on the same page
                std::vector<std::string> addressees;
                for (size_t c = 0; c < page_chars.size(); ++c)
                    if (c != speaker && page_chars[c].name != page_chars[speaker].name)
                        addressees.push_back(page_chars[c].name);
                if (addressees.empty())
                    for (const auto& name : roster_names)
                        if (name != page_chars[speaker].name) addressees.push_back(name);
                dialogue = addressees[addressee_pick % addressees.size()] + ", " + filler;
            } else {
                std::string capitalized = filler;
                capitalized[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(capitalized[0])));
                dialogue = capitalized;
            }
            page_texts.push_back({placement, speaker, dialogue});
        }

        // reading order within the page: top-to-bottom, then left-to-right
        std::vector<size_t> order(page_texts.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (page_texts[a].placement.cy != page_texts[b].placement.cy)
                return page_texts[a].placement.cy < page_texts[b].placement.cy;
            return page_texts[a].placement.cx < page_texts[b].placement.cx;
        });
        for (size_t rank = 0; rank < order.size(); ++rank) {
            const PlacedText& placed = page_texts[order[rank]];
            TextRegion region;
            region.id = "t" + std::to_string(text_counter++);
            region.page_index = page;
            region.box = placed.placement.box;
            region.text = placed.dialogue;
            region.order = static_cast<int>(rank);
            region.gt_label = page_chars[placed.speaker].name;
            corpus.gt_pairs.insert({page_chars[placed.speaker].id, region.id});
            corpus.document.texts.push_back(std::move(region));
        }
    }

    Rng feature_rng(derive_seed(config.seed, "synth-features"));
    for (const auto& region : corpus.document.characters) {
        const std::vector<double>& center = centers.at(*region.gt_label);
        std::vector<double> vec(center.size());
        for (size_t j = 0; j < vec.size(); ++j) vec[j] = center[j] + feature_rng.next_normal();
        corpus.features[region.id] = std::move(vec);
    }

    validate_document(corpus.document);
    return corpus;
}

DifficultyReport difficulty_report(const SynthCorpus& corpus) {
    DifficultyReport report;
    report.distance_relationship_accuracy =
        eval::relationship_accuracy(distance_scores(corpus.document), corpus.gt_pairs);

    if (!corpus.document.texts.empty()) {
        size_t mentions = 0;
        for (const auto& t : corpus.document.texts) {
            for (const auto& e : corpus.document.roster.entries()) {
                if (t.text.find(e.name) != std::string::npos) {
                    ++mentions;
                    break;
                }
            }
        }
        report.mention_rate = static_cast<double>(mentions) / static_cast<double>(corpus.document.texts.size());
    }

    // overlap: error rate of classifying each feature by its nearest
    // empirical class centroid
    std::map<std::string, std::pair<std::vector<double>, size_t>> sums;
    for (const auto& region : corpus.document.characters) {
        const auto& vec = corpus.features.at(region.id);
        auto& [sum, count] = sums[*region.gt_label];
        if (sum.empty()) sum.assign(vec.size(), 0.0);
        for (size_t j = 0; j < vec.size(); ++j) sum[j] += vec[j];
        ++count;
    }
    std::map<std::string, std::vector<double>> centroids;
    for (auto& [name, acc] : sums) {
        std::vector<double> centroid = acc.first;
        for (double& v : centroid) v /= static_cast<double>(acc.second);
        centroids[name] = std::move(centroid);
    }
    size_t wrong = 0;
    for (const auto& region : corpus.document.characters) {
        const auto& vec = corpus.features.at(region.id);
        std::string best;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (const auto& [name, centroid] : centroids) {
            double d2 = 0.0;
            for (size_t j = 0; j < vec.size(); ++j) {
                double diff = vec[j] - centroid[j];
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = name;
            }
        }
        if (best != *region.gt_label) ++wrong;
    }
    if (!corpus.document.characters.empty())
        report.cluster_overlap = static_cast<double>(wrong) / static_cast<double>(corpus.document.characters.size());
    return report;
}

}  // namespace comicid::synth
