#include "comicid/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "comicid/evaluation.hpp"
#include "comicid/propagation.hpp"
#include "comicid/rng.hpp"

namespace comicid {

using nlohmann::json;

namespace {

constexpr const char* kTraceFormatVersion = "1";

void validate_config(const PipelineConfig& config) {
    if (config.iterations < 0) throw ValidationError("iterations must be >= 0");
    if (config.roster_filter_pct < 0.0 || config.roster_filter_pct >= 100.0)
        throw ValidationError("roster_filter_pct must be in [0,100)");
    if (!(config.rescore.lambda > 0.0)) throw ValidationError("rescore lambda must be positive");
    if (config.min_level < 1 || config.min_level > 5) throw ValidationError("min_level must be in 1..5");
    if (config.min_prob < 0.0 || config.min_prob > 1.0) throw ValidationError("min_prob must be in [0,1]");
    if (config.chunk_size < 1) throw ValidationError("chunk_size must be >= 1");
    if (config.retry_budget < 0) throw ValidationError("retry_budget must be >= 0");
}

LabelAssignment all_abstain_chars(const ComicDocument& doc) {
    LabelAssignment out;
    for (const auto& c : doc.characters) out.set_abstain(c.id);
    return out;
}

// every character region appears in the assignment, possibly ABSTAIN
void ensure_char_coverage(LabelAssignment& assignment, const ComicDocument& doc) {
    for (const auto& c : doc.characters)
        if (!assignment.contains(c.id)) assignment.set_abstain(c.id);
}

struct GtViews {
    std::map<std::string, std::string> text_gt;
    std::map<std::string, std::string> char_gt;
    std::set<std::string> text_universe;
    std::set<std::string> char_universe;
};

GtViews gt_views(const ComicDocument& doc) {
    GtViews views;
    views.text_gt = text_gt_labels(doc);
    views.char_gt = char_gt_labels(doc);
    for (const auto& t : doc.texts) views.text_universe.insert(t.id);
    for (const auto& c : doc.characters) views.char_universe.insert(c.id);
    return views;
}

std::optional<PseudoQuality> pseudo_quality(const PseudoLabelSet& thresholded, const PseudoLabelSet& unthresholded,
                                            const std::map<std::string, std::string>& gt,
                                            const std::set<std::string>& universe) {
    if (gt.empty() || universe.empty()) return std::nullopt;
    PseudoQuality q = eval::pseudo_label_quality(thresholded, gt, universe);
    // 4th-column semantics: accuracy measures the unfiltered propagation
    q.accuracy = eval::pseudo_label_quality(unthresholded, gt, universe).precision;
    return q;
}

}  // namespace

NameRoster filter_roster(const NameRoster& roster, const ComicDocument& doc, double pct) {
    if (pct < 0.0 || pct >= 100.0) throw ValidationError("roster_filter_pct must be in [0,100)");
    if (!doc.has_any_gt()) return roster;

    std::map<std::string, size_t> counts;
    size_t total = 0;
    for (const auto& c : doc.characters)
        if (c.gt_label) {
            ++counts[*c.gt_label];
            ++total;
        }
    for (const auto& t : doc.texts)
        if (t.gt_label) {
            ++counts[*t.gt_label];
            ++total;
        }
    if (total == 0) return roster;

    std::vector<RosterEntry> kept;
    for (const auto& e : roster.entries()) {
        auto it = counts.find(e.name);
        double share = it == counts.end() ? 0.0 : 100.0 * static_cast<double>(it->second) / static_cast<double>(total);
        if (share >= pct) kept.push_back(e);
    }
    return NameRoster::from_entries(std::move(kept));
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

namespace {

struct LoopState {
    NameRoster roster;
    std::string context;
    RelationshipMatrix scores;
    LabelAssignment text_assignment;
    LabelAssignment char_assignment;
};

NameRoster resolve_roster(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config) {
    NameRoster roster;
    if (inputs.roster)
        roster = *inputs.roster;
    else if (!inputs.document.roster.empty())
        roster = inputs.document.roster;
    else
        roster = extract_names(inputs.document, backend, config.retry_budget, config.prompt.language);
    roster = filter_roster(roster, inputs.document, config.roster_filter_pct);
    if (roster.empty()) throw ValidationError("roster is empty after filtering; nothing to predict");
    return roster;
}

MetricSnapshot initial_metrics(const PipelineInputs& inputs, const GtViews& gt, const LoopState& state) {
    MetricSnapshot m;
    if (!gt.text_gt.empty()) m.speaker_accuracy = eval::label_accuracy(state.text_assignment, gt.text_gt);
    if (!inputs.gt_pairs.empty()) m.relationship_accuracy = eval::relationship_accuracy(state.scores, inputs.gt_pairs);
    return m;
}

IterationRecord run_iteration(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config,
                              const GtViews& gt, LoopState& state, int iteration) {
    const ComicDocument& doc = inputs.document;

    // character identification from text labels
    PseudoLabelSet pseudo_tc = propagate_text_to_char(state.scores, state.text_assignment, config.min_level);
    PseudoLabelSet pseudo_tc_raw = propagate_text_to_char(state.scores, state.text_assignment, 1);

    LabelAssignment chars;
    if (pseudo_tc.empty()) {
        chars = all_abstain_chars(doc);
    } else {
        clf::TrainConfig train_config = config.classifier;
        train_config.seed = derive_seed(config.seed, "clf-iter", static_cast<uint64_t>(iteration));
        try {
            clf::ClassifierModel model = clf::train(inputs.features, pseudo_tc, train_config);
            chars = clf::predict(model, inputs.features);
        } catch (const DegenerateTraining&) {
            chars = clf::predict_centroid(clf::train_centroid(inputs.features, pseudo_tc), inputs.features);
        }
        ensure_char_coverage(chars, doc);
    }

    RelationshipMatrix base = config.rescore_reset ? inputs.initial_scores : state.scores;
    RelationshipMatrix mid = rescore(base, chars, state.text_assignment, config.rescore);

    // speaker prediction with image-derived candidates
    PseudoLabelSet pseudo_ct = propagate_char_to_text(mid, chars, config.min_prob);
    PseudoLabelSet pseudo_ct_raw = propagate_char_to_text(mid, chars, 0.0);

    LabelAssignment texts = predict_speakers(doc, state.roster, backend, config.prompt,
                                             config.prompt.candidates ? &pseudo_ct : nullptr, state.context,
                                             config.chunk_size, config.retry_budget);

    RelationshipMatrix rescored = rescore(mid, chars, texts, config.rescore);

    IterationRecord record;
    record.iteration = iteration;
    record.text_assignment = texts;
    record.char_assignment = chars;
    record.pseudo_tc = pseudo_tc;
    record.pseudo_ct = pseudo_ct;
    record.scores = rescored;
    if (!gt.text_gt.empty()) record.metrics.speaker_accuracy = eval::label_accuracy(texts, gt.text_gt);
    if (!gt.char_gt.empty()) record.metrics.character_accuracy = eval::label_accuracy(chars, gt.char_gt);
    if (!inputs.gt_pairs.empty())
        record.metrics.relationship_accuracy = eval::relationship_accuracy(rescored, inputs.gt_pairs);
    record.metrics.pseudo_tc = pseudo_quality(pseudo_tc, pseudo_tc_raw, gt.char_gt, gt.char_universe);
    record.metrics.pseudo_ct = pseudo_quality(pseudo_ct, pseudo_ct_raw, gt.text_gt, gt.text_universe);

    state.text_assignment = std::move(texts);
    state.char_assignment = record.char_assignment;
    state.scores = record.scores;
    return record;
}

PipelineTrace continue_loop(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config,
                            const GtViews& gt, LoopState& state, PipelineTrace trace, int first_iteration,
                            int last_iteration) {
    for (int i = first_iteration; i <= last_iteration; ++i) {
        try {
            trace.iterations.push_back(run_iteration(inputs, backend, config, gt, state, i));
        } catch (const Error& e) {
            throw PipelineAborted("iteration " + std::to_string(i) + " failed: " + e.what(), std::move(trace));
        }
    }
    return trace;
}

}  // namespace

PipelineTrace run_pipeline(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config) {
    validate_config(config);
    validate_document(inputs.document);
    GtViews gt = gt_views(inputs.document);

    LoopState state;
    state.roster = resolve_roster(inputs, backend, config);
    if (config.prompt.context && backend.caps().supports_context)
        state.context = extract_context(inputs.document, state.roster, backend, config.retry_budget,
                                        config.prompt.language);

    // iteration 0: text-only prediction, no candidates
    state.scores = inputs.initial_scores;
    state.text_assignment =
        predict_speakers(inputs.document, state.roster, backend, config.prompt, nullptr, state.context,
                         config.chunk_size, config.retry_budget);
    state.char_assignment = all_abstain_chars(inputs.document);

    PipelineTrace trace;
    IterationRecord initial;
    initial.iteration = 0;
    initial.text_assignment = state.text_assignment;
    initial.char_assignment = state.char_assignment;
    initial.scores = state.scores;
    initial.metrics = initial_metrics(inputs, gt, state);
    trace.iterations.push_back(std::move(initial));

    return continue_loop(inputs, backend, config, gt, state, std::move(trace), 1, config.iterations);
}

PipelineTrace resume_pipeline(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config,
                              const PipelineTrace& existing, int additional_iterations) {
    validate_config(config);
    if (additional_iterations < 0) throw ValidationError("additional_iterations must be >= 0");
    if (existing.iterations.empty()) throw ValidationError("cannot resume an empty trace");
    for (size_t i = 0; i < existing.iterations.size(); ++i)
        if (existing.iterations[i].iteration != static_cast<int>(i))
            throw ValidationError("corrupted trace: iteration indices are not contiguous from 0");
    if (additional_iterations == 0) return existing;

    validate_document(inputs.document);
    GtViews gt = gt_views(inputs.document);

    LoopState state;
    state.roster = resolve_roster(inputs, backend, config);
    if (config.prompt.context && backend.caps().supports_context)
        state.context = extract_context(inputs.document, state.roster, backend, config.retry_budget,
                                        config.prompt.language);
    const IterationRecord& last = existing.last();
    state.scores = last.scores;
    state.text_assignment = last.text_assignment;
    state.char_assignment = last.char_assignment;

    int first = last.iteration + 1;
    return continue_loop(inputs, backend, config, gt, state, existing, first, last.iteration + additional_iterations);
}

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

namespace {

json config_to_json(const PipelineConfig& config) {
    json j;
    j["iterations"] = config.iterations;
    j["seed"] = config.seed;
    j["lambda"] = config.rescore.lambda;
    j["rescore_mode"] = config.rescore.mode == RescoreConfig::Mode::Intent ? "intent" : "literal";
    j["rescore_reset"] = config.rescore_reset;
    j["min_level"] = config.min_level;
    j["min_prob"] = config.min_prob;
    j["ctx"] = config.prompt.context;
    j["cand"] = config.prompt.candidates;
    j["prob"] = config.prompt.show_prob;
    j["language"] = config.prompt.language;
    j["roster_filter_pct"] = config.roster_filter_pct;
    j["chunk_size"] = config.chunk_size;
    j["retry_budget"] = config.retry_budget;
    j["clf_epochs"] = config.classifier.epochs;
    j["clf_learning_rate"] = config.classifier.learning_rate;
    j["clf_l2"] = config.classifier.l2;
    j["clf_val_fraction"] = config.classifier.val_fraction;
    j["clf_ensemble_size"] = config.classifier.ensemble_size;
    return j;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig config;
    config.iterations = j.at("iterations").get<int>();
    config.seed = j.at("seed").get<uint64_t>();
    config.rescore.lambda = j.at("lambda").get<double>();
    std::string mode = j.at("rescore_mode").get<std::string>();
    if (mode == "intent")
        config.rescore.mode = RescoreConfig::Mode::Intent;
    else if (mode == "literal")
        config.rescore.mode = RescoreConfig::Mode::Literal;
    else
        throw ValidationError("unknown rescore_mode: " + mode);
    config.rescore_reset = j.at("rescore_reset").get<bool>();
    config.min_level = j.at("min_level").get<int>();
    config.min_prob = j.at("min_prob").get<double>();
    config.prompt.context = j.at("ctx").get<bool>();
    config.prompt.candidates = j.at("cand").get<bool>();
    config.prompt.show_prob = j.at("prob").get<bool>();
    config.prompt.language = j.at("language").get<std::string>();
    config.roster_filter_pct = j.at("roster_filter_pct").get<double>();
    config.chunk_size = j.at("chunk_size").get<int>();
    config.retry_budget = j.at("retry_budget").get<int>();
    config.classifier.epochs = j.at("clf_epochs").get<int>();
    config.classifier.learning_rate = j.at("clf_learning_rate").get<double>();
    config.classifier.l2 = j.at("clf_l2").get<double>();
    config.classifier.val_fraction = j.at("clf_val_fraction").get<double>();
    config.classifier.ensemble_size = j.at("clf_ensemble_size").get<int>();
    return config;
}

}  // namespace

std::string config_to_json_string(const PipelineConfig& config) { return config_to_json(config).dump(2); }

// ---------------------------------------------------------------------------
// Trace persistence
// ---------------------------------------------------------------------------

namespace {

json confidence_json(const Confidence& c) {
    json j;
    if (c.is_level())
        j["level"] = c.level_value();
    else
        j["prob"] = c.prob_value();
    return j;
}

Confidence confidence_from(const json& j) {
    if (j.contains("level")) return Confidence::level(j.at("level").get<int>());
    if (j.contains("prob")) return Confidence::prob(j.at("prob").get<double>());
    throw ValidationError("confidence must contain 'level' or 'prob'");
}

void write_lines(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
}

std::string labels_to_jsonl(const LabelAssignment& assignment) {
    std::ostringstream out;
    for (const auto& [region_id, label] : assignment.entries()) {
        json record;
        record["region_id"] = region_id;
        if (label) {
            record["name"] = label->name;
            record["confidence"] = confidence_json(label->confidence);
        } else {
            record["name"] = nullptr;
        }
        out << record.dump() << "\n";
    }
    return out.str();
}

LabelAssignment labels_from_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    LabelAssignment out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line);
        std::string region_id = record.at("region_id").get<std::string>();
        if (record.at("name").is_null())
            out.set_abstain(region_id);
        else
            out.set(region_id, Label{record.at("name").get<std::string>(), confidence_from(record.at("confidence"))});
    }
    return out;
}

std::string pseudo_to_jsonl(const PseudoLabelSet& pseudo) {
    std::ostringstream out;
    for (const auto& [region_id, label] : pseudo) {
        json record;
        record["region_id"] = region_id;
        record["name"] = label.name;
        record["source_region_id"] = label.source_region_id;
        record["confidence"] = confidence_json(label.source_confidence);
        out << record.dump() << "\n";
    }
    return out.str();
}

PseudoLabelSet pseudo_from_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    PseudoLabelSet out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line);
        out[record.at("region_id").get<std::string>()] =
            PseudoLabel{record.at("name").get<std::string>(), record.at("source_region_id").get<std::string>(),
                        confidence_from(record.at("confidence"))};
    }
    return out;
}

std::string scores_to_jsonl(const RelationshipMatrix& matrix) {
    std::ostringstream out;
    for (const auto& [key, score] : matrix.entries()) {
        json record;
        record["char_id"] = key.first;
        record["text_id"] = key.second;
        record["score"] = score;
        out << record.dump() << "\n";
    }
    return out.str();
}

RelationshipMatrix scores_from_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    RelationshipMatrix out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json record = json::parse(line);
        out.set(record.at("char_id").get<std::string>(), record.at("text_id").get<std::string>(),
                record.at("score").get<double>());
    }
    return out;
}

json metrics_to_json(const MetricSnapshot& m, int iteration) {
    json j;
    j["iteration"] = iteration;
    if (m.speaker_accuracy) j["speaker_accuracy"] = *m.speaker_accuracy;
    if (m.character_accuracy) j["character_accuracy"] = *m.character_accuracy;
    if (m.relationship_accuracy) j["relationship_accuracy"] = *m.relationship_accuracy;
    auto quality = [](const PseudoQuality& q) {
        json out;
        out["precision"] = q.precision;
        out["recall"] = q.recall;
        out["accuracy"] = q.accuracy;
        out["emitted"] = q.emitted;
        out["correct"] = q.correct;
        out["no_emissions"] = q.no_emissions;
        return out;
    };
    if (m.pseudo_tc) j["pseudo_tc"] = quality(*m.pseudo_tc);
    if (m.pseudo_ct) j["pseudo_ct"] = quality(*m.pseudo_ct);
    return j;
}

MetricSnapshot metrics_from_json(const json& j) {
    MetricSnapshot m;
    if (j.contains("speaker_accuracy")) m.speaker_accuracy = j.at("speaker_accuracy").get<double>();
    if (j.contains("character_accuracy")) m.character_accuracy = j.at("character_accuracy").get<double>();
    if (j.contains("relationship_accuracy")) m.relationship_accuracy = j.at("relationship_accuracy").get<double>();
    auto quality = [](const json& q) {
        PseudoQuality out;
        out.precision = q.at("precision").get<double>();
        out.recall = q.at("recall").get<double>();
        out.accuracy = q.at("accuracy").get<double>();
        out.emitted = q.at("emitted").get<size_t>();
        out.correct = q.at("correct").get<size_t>();
        out.no_emissions = q.at("no_emissions").get<bool>();
        return out;
    };
    if (j.contains("pseudo_tc")) m.pseudo_tc = quality(j.at("pseudo_tc"));
    if (j.contains("pseudo_ct")) m.pseudo_ct = quality(j.at("pseudo_ct"));
    return m;
}

}  // namespace

void save_trace(const PipelineTrace& trace, const PipelineConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    // clear any stale iteration directories from a previous, longer run
    for (int k = 0;; ++k) {
        std::filesystem::path iter_dir = dir / ("iter_" + std::to_string(k));
        if (!std::filesystem::exists(iter_dir)) break;
        std::filesystem::remove_all(iter_dir);
    }

    json meta;
    meta["format_version"] = kTraceFormatVersion;
    meta["config"] = config_to_json(config);
    json metrics = json::array();
    for (const auto& record : trace.iterations) metrics.push_back(metrics_to_json(record.metrics, record.iteration));
    meta["metrics"] = std::move(metrics);
    meta["completed_iterations"] = trace.iterations.empty() ? -1 : trace.iterations.back().iteration;
    write_lines(dir / "meta.json", meta.dump(2) + "\n");

    for (const auto& record : trace.iterations) {
        std::filesystem::path iter_dir = dir / ("iter_" + std::to_string(record.iteration));
        std::filesystem::create_directories(iter_dir);
        write_lines(iter_dir / "text_labels.jsonl", labels_to_jsonl(record.text_assignment));
        write_lines(iter_dir / "char_labels.jsonl", labels_to_jsonl(record.char_assignment));
        write_lines(iter_dir / "pseudo_tc.jsonl", pseudo_to_jsonl(record.pseudo_tc));
        write_lines(iter_dir / "pseudo_ct.jsonl", pseudo_to_jsonl(record.pseudo_ct));
        write_lines(iter_dir / "scores.jsonl", scores_to_jsonl(record.scores));
    }
}

std::pair<PipelineTrace, PipelineConfig> load_trace(const std::filesystem::path& dir) {
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw ValidationError("cannot open trace meta: " + (dir / "meta.json").string());
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::parse_error& e) {
        throw ValidationError((dir / "meta.json").string() + ": " + e.what());
    }
    if (meta.at("format_version").get<std::string>() != kTraceFormatVersion)
        throw ValidationError("trace format version mismatch in " + dir.string());

    PipelineConfig config = config_from_json(meta.at("config"));
    PipelineTrace trace;
    const json& metrics = meta.at("metrics");
    for (int k = 0;; ++k) {
        std::filesystem::path iter_dir = dir / ("iter_" + std::to_string(k));
        if (!std::filesystem::exists(iter_dir)) break;
        IterationRecord record;
        record.iteration = k;
        record.text_assignment = labels_from_jsonl(iter_dir / "text_labels.jsonl");
        record.char_assignment = labels_from_jsonl(iter_dir / "char_labels.jsonl");
        record.pseudo_tc = pseudo_from_jsonl(iter_dir / "pseudo_tc.jsonl");
        record.pseudo_ct = pseudo_from_jsonl(iter_dir / "pseudo_ct.jsonl");
        record.scores = scores_from_jsonl(iter_dir / "scores.jsonl");
        if (static_cast<size_t>(k) < metrics.size()) record.metrics = metrics_from_json(metrics[static_cast<size_t>(k)]);
        trace.iterations.push_back(std::move(record));
    }
    if (trace.iterations.empty()) throw ValidationError("trace directory has no iterations: " + dir.string());
    return {std::move(trace), std::move(config)};
}

}  // namespace comicid
