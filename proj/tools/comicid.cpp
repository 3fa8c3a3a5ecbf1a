// comicid command-line entry point: generate synthetic corpora, run the
// iterative pipeline, evaluate traces, run the clustering baseline, and
// aggregate cross-title reports.
//
// Exit codes: 0 success, 2 usage, 3 input validation, 4 backend failure,
// 5 internal invariant breach.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "comicid/classifier.hpp"
#include "comicid/evaluation.hpp"
#include "comicid/io.hpp"
#include "comicid/pipeline.hpp"
#include "comicid/propagation.hpp"
#include "comicid/relationship.hpp"
#include "comicid/remote.hpp"
#include "comicid/rng.hpp"
#include "comicid/speaker.hpp"
#include "comicid/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace comicid;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
    std::string out;
    int titles = 1;
    std::string title_prefix = "synth";
    synth::SynthConfig synth;
};

int cmd_gen(const GenOptions& opt) {
    for (int i = 0; i < opt.titles; ++i) {
        synth::SynthConfig config = opt.synth;
        config.title = opt.title_prefix + std::to_string(i);
        config.seed = derive_seed(opt.synth.seed, "title", static_cast<uint64_t>(i));
        synth::SynthCorpus corpus = synth::generate(config);

        fs::path dir = fs::path(opt.out) / config.title;
        io::save_document(corpus.document, dir / "document.json");
        io::save_features(corpus.features, dir / "features.jsonl");
        io::save_gt_pairs(corpus.gt_pairs, dir / "gt_pairs.jsonl");

        synth::DifficultyReport difficulty = synth::difficulty_report(corpus);
        json dj;
        dj["distance_relationship_accuracy"] = difficulty.distance_relationship_accuracy;
        dj["mention_rate"] = difficulty.mention_rate;
        dj["cluster_overlap"] = difficulty.cluster_overlap;
        write_file(dir / "difficulty.json", dj.dump(2) + "\n");
        std::cout << "generated " << dir.string() << " (" << corpus.document.texts.size() << " texts, "
                  << corpus.document.characters.size() << " character regions)\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// shared input loading for run/eval/baseline
// ---------------------------------------------------------------------------

struct RelationChoice {
    std::string relation = "sgg";  // sgg | distance | gt
    std::string scores_path;
    std::string gt_pairs_path;
};

RelationshipMatrix load_relation(const RelationChoice& choice, const ComicDocument& doc, const GtPairs& gt_pairs) {
    if (choice.relation == "distance") return distance_scores(doc);
    if (choice.relation == "gt") {
        if (gt_pairs.empty()) throw UsageError("--relation gt requires --gt-pairs");
        return gt_scores(doc, gt_pairs);
    }
    if (choice.relation == "sgg") {
        if (choice.scores_path.empty()) throw UsageError("--relation sgg requires --scores (or use --relation distance)");
        return io::load_scores(choice.scores_path, doc);
    }
    throw UsageError("unknown --relation value: " + choice.relation);
}

json metrics_json(const MetricSnapshot& m, int iteration) {
    json j;
    j["iteration"] = iteration;
    if (m.speaker_accuracy) j["speaker_accuracy"] = *m.speaker_accuracy;
    if (m.character_accuracy) j["character_accuracy"] = *m.character_accuracy;
    if (m.relationship_accuracy) j["relationship_accuracy"] = *m.relationship_accuracy;
    auto quality = [](const PseudoQuality& q) {
        return json{{"precision", q.precision}, {"recall", q.recall},   {"accuracy", q.accuracy},
                    {"emitted", q.emitted},     {"correct", q.correct}, {"no_emissions", q.no_emissions}};
    };
    if (m.pseudo_tc) j["pseudo_tc"] = quality(*m.pseudo_tc);
    if (m.pseudo_ct) j["pseudo_ct"] = quality(*m.pseudo_ct);
    return j;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunOptions {
    std::string doc_path;
    std::string features_path;
    RelationChoice relation;
    std::string backend = "oracle";  // oracle | remote-record | remote-replay
    double oracle_error = 0.0;
    double oracle_adopt = 0.7;
    std::string endpoint;
    std::string model = "gpt-4";
    std::string transcript;
    std::string auth_env = "COMICID_API_TOKEN";
    bool extract_roster = false;
    bool zero_shot = false;
    std::string gt_doc_path;
    std::string name_map_path;
    std::string resume_dir;
    int add_iters = 1;
    std::string out;
    PipelineConfig pipeline;
};

std::unique_ptr<SpeakerBackend> make_backend(const RunOptions& opt, const ComicDocument& doc, uint64_t pipeline_seed) {
    if (opt.backend == "oracle") {
        OracleConfig config;
        config.error_rate = opt.oracle_error;
        config.candidate_adopt_prob = opt.oracle_adopt;
        config.seed = derive_seed(pipeline_seed, "oracle");
        return make_scripted_oracle(doc, config);
    }
    if (opt.backend == "remote-record" || opt.backend == "remote-replay") {
        if (opt.transcript.empty()) throw UsageError("remote backends require --transcript");
        RemoteConfig config;
        config.endpoint = opt.endpoint;
        config.model = opt.model;
        config.auth_env = opt.auth_env;
        config.transport_retries = opt.pipeline.retry_budget;
        config.mode = opt.backend == "remote-record" ? TranscriptMode::Record : TranscriptMode::Replay;
        config.transcript_path = opt.transcript;
        if (config.mode == TranscriptMode::Record && opt.endpoint.empty())
            throw UsageError("--backend remote-record requires --endpoint");
        return make_remote_backend(config);
    }
    throw UsageError("unknown --backend value: " + opt.backend);
}

void write_zero_shot_section(json& report, const RunOptions& opt, const ComicDocument& doc,
                             const PipelineTrace& trace, const NameRoster& roster) {
    ComicDocument gt_doc = io::load_document(opt.gt_doc_path);
    std::optional<io::NameMap> name_map;
    if (!opt.name_map_path.empty()) name_map = io::load_name_map(opt.name_map_path);

    const IterationRecord& last = trace.last();
    auto collect_preds = [&](bool chars) {
        std::vector<eval::RegionPrediction> preds;
        if (chars) {
            for (const auto& c : doc.characters) {
                auto label = last.char_assignment.get(c.id);
                preds.push_back({c.box, label ? std::optional<std::string>(label->name) : std::nullopt});
            }
        } else {
            for (const auto& t : doc.texts) {
                auto label = last.text_assignment.get(t.id);
                preds.push_back({t.box, label ? std::optional<std::string>(label->name) : std::nullopt});
            }
        }
        return preds;
    };
    auto collect_gt = [&](bool chars) {
        std::vector<eval::RegionPrediction> gts;
        if (chars) {
            for (const auto& c : gt_doc.characters)
                if (c.gt_label) gts.push_back({c.box, *c.gt_label});
        } else {
            for (const auto& t : gt_doc.texts)
                if (t.gt_label) gts.push_back({t.box, *t.gt_label});
        }
        return gts;
    };

    json section;
    const io::NameMap* map_ptr = name_map ? &*name_map : nullptr;
    for (bool chars : {false, true}) {
        auto gts = collect_gt(chars);
        if (gts.empty()) continue;
        eval::ZeroShotResult result = eval::zero_shot_score(collect_preds(chars), gts, 0.5, map_ptr);
        json rj;
        rj["accuracy"] = result.accuracy;
        rj["matched"] = result.matched;
        rj["correct"] = result.correct;
        rj["gt_total"] = result.gt_total;

        NameRoster mapped = name_map ? io::apply_name_map(roster, *name_map) : roster;
        std::vector<std::string> gt_names;
        for (const auto& g : gts) gt_names.push_back(*g.name);
        rj["upper_bound"] = eval::upper_bound(mapped, gt_names);
        section[chars ? "character_id" : "speaker_pred"] = std::move(rj);
    }
    report["zero_shot"] = std::move(section);
}

int cmd_run(const RunOptions& opt) {
    if (opt.out.empty()) throw UsageError("--out is required");

    PipelineInputs inputs;
    inputs.document = io::load_document(opt.doc_path);
    if (!opt.relation.gt_pairs_path.empty()) inputs.gt_pairs = io::load_gt_pairs(opt.relation.gt_pairs_path, inputs.document);
    inputs.initial_scores = load_relation(opt.relation, inputs.document, inputs.gt_pairs);
    if (!opt.features_path.empty()) inputs.features = io::load_features(opt.features_path);
    if (opt.pipeline.iterations > 0 && inputs.features.empty())
        throw UsageError("--features is required when --iters > 0");

    // resuming continues under the recorded config, including its seed
    std::optional<PipelineTrace> existing;
    PipelineConfig config = opt.pipeline;
    if (!opt.resume_dir.empty()) {
        auto [trace_loaded, config_loaded] = load_trace(opt.resume_dir);
        existing = std::move(trace_loaded);
        config = std::move(config_loaded);
    }

    std::unique_ptr<SpeakerBackend> backend = make_backend(opt, inputs.document, config.seed);

    // resolve the roster up front so zero-shot scoring can reuse it
    NameRoster roster;
    bool extract = opt.extract_roster || opt.zero_shot || inputs.document.roster.empty();
    if (extract)
        roster = extract_names(inputs.document, *backend, config.retry_budget, config.prompt.language);
    else
        roster = inputs.document.roster;
    inputs.roster = roster;

    fs::path out_dir(opt.out);
    fs::path trace_dir = out_dir / "trace";

    PipelineTrace trace;
    try {
        if (existing)
            trace = resume_pipeline(inputs, *backend, config, *existing, opt.add_iters);
        else
            trace = run_pipeline(inputs, *backend, config);
        save_trace(trace, config, trace_dir);
    } catch (const PipelineAborted& e) {
        if (!e.partial_trace.iterations.empty()) {
            save_trace(e.partial_trace, config, trace_dir);
            std::cerr << "pipeline aborted; partial trace saved to " << trace_dir.string() << "\n";
        }
        throw;
    }

    json report;
    report["title"] = inputs.document.title;
    json iterations = json::array();
    std::vector<MetricSnapshot> snapshots;
    for (const auto& record : trace.iterations) {
        iterations.push_back(metrics_json(record.metrics, record.iteration));
        snapshots.push_back(record.metrics);
    }
    report["iterations"] = std::move(iterations);
    if (opt.zero_shot && !opt.gt_doc_path.empty()) write_zero_shot_section(report, opt, inputs.document, trace, roster);

    write_file(out_dir / "report.json", report.dump(2) + "\n");
    std::string table = eval::render_iteration_table(snapshots);
    write_file(out_dir / "report.txt", table);
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string trace_dir;
    std::string doc_path;
    std::string gt_pairs_path;
    std::string out;
};

int cmd_eval(const EvalOptions& opt) {
    auto [trace, config] = load_trace(opt.trace_dir);
    ComicDocument doc = io::load_document(opt.doc_path);
    GtPairs gt_pairs;
    if (!opt.gt_pairs_path.empty()) gt_pairs = io::load_gt_pairs(opt.gt_pairs_path, doc);

    auto text_gt = text_gt_labels(doc);
    auto char_gt = char_gt_labels(doc);
    std::set<std::string> text_universe;
    std::set<std::string> char_universe;
    for (const auto& t : doc.texts) text_universe.insert(t.id);
    for (const auto& c : doc.characters) char_universe.insert(c.id);

    json report;
    json iterations = json::array();
    std::vector<MetricSnapshot> snapshots;
    for (const auto& record : trace.iterations) {
        MetricSnapshot m;
        if (!text_gt.empty()) m.speaker_accuracy = eval::label_accuracy(record.text_assignment, text_gt);
        if (!char_gt.empty() && record.iteration > 0)
            m.character_accuracy = eval::label_accuracy(record.char_assignment, char_gt);
        if (!gt_pairs.empty()) m.relationship_accuracy = eval::relationship_accuracy(record.scores, gt_pairs);
        if (!char_gt.empty() && !record.pseudo_tc.empty())
            m.pseudo_tc = eval::pseudo_label_quality(record.pseudo_tc, char_gt, char_universe);
        if (!text_gt.empty() && !record.pseudo_ct.empty())
            m.pseudo_ct = eval::pseudo_label_quality(record.pseudo_ct, text_gt, text_universe);
        iterations.push_back(metrics_json(m, record.iteration));
        snapshots.push_back(m);
    }
    report["iterations"] = std::move(iterations);

    std::string table = eval::render_iteration_table(snapshots);
    if (!opt.out.empty()) {
        write_file(fs::path(opt.out) / "report.json", report.dump(2) + "\n");
        write_file(fs::path(opt.out) / "report.txt", table);
    }
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

struct BaselineOptions {
    std::string doc_path;
    std::string features_path;
    RelationChoice relation;
    uint64_t seed = 0;
    std::string out;
};

int cmd_baseline(const BaselineOptions& opt) {
    ComicDocument doc = io::load_document(opt.doc_path);
    FeatureTable features = io::load_features(opt.features_path);
    GtPairs gt_pairs;
    if (!opt.relation.gt_pairs_path.empty()) gt_pairs = io::load_gt_pairs(opt.relation.gt_pairs_path, doc);
    RelationshipMatrix scores = load_relation(opt.relation, doc, gt_pairs);

    auto char_gt = char_gt_labels(doc);
    if (char_gt.empty()) throw ValidationError("baseline requires ground-truth character labels (oracle cluster mapping)");

    std::vector<std::string> roster_names;
    if (!doc.roster.empty()) {
        for (const auto& e : doc.roster.entries()) roster_names.push_back(e.name);
    } else {
        std::set<std::string> names;
        for (const auto& [id, name] : char_gt) names.insert(name);
        roster_names.assign(names.begin(), names.end());
    }

    std::vector<std::string> region_ids;
    std::vector<std::vector<double>> points;
    for (const auto& [id, vec] : features) {
        region_ids.push_back(id);
        points.push_back(vec);
    }
    clf::KMeansResult clustering = clf::kmeans(points, static_cast<int>(roster_names.size()), opt.seed);

    // oracle mapping over the regions that carry ground truth
    std::vector<int> clusters_with_gt;
    std::vector<std::string> labels_with_gt;
    for (size_t i = 0; i < region_ids.size(); ++i) {
        auto it = char_gt.find(region_ids[i]);
        if (it == char_gt.end()) continue;
        clusters_with_gt.push_back(clustering.assignment[i]);
        labels_with_gt.push_back(it->second);
    }
    clf::ClusterMapping mapping = clf::optimal_cluster_mapping(clusters_with_gt, labels_with_gt);

    LabelAssignment char_assignment;
    for (size_t i = 0; i < region_ids.size(); ++i) {
        auto mapped = mapping.cluster_to_name.at(clustering.assignment[i]);
        if (mapped)
            char_assignment.set(region_ids[i], Label{*mapped, Confidence::prob(1.0)});
        else
            char_assignment.set_abstain(region_ids[i]);
    }

    // propagate character labels to texts through the relationship argmax
    PseudoLabelSet text_labels = propagate_char_to_text(scores, char_assignment, 0.0);
    LabelAssignment text_assignment;
    for (const auto& t : doc.texts) {
        auto it = text_labels.find(t.id);
        if (it != text_labels.end())
            text_assignment.set(t.id, Label{it->second.name, it->second.source_confidence});
        else
            text_assignment.set_abstain(t.id);
    }

    json report;
    report["gt_assisted"] = true;  // cluster -> label mapping uses ground truth
    report["character_accuracy"] = eval::label_accuracy(char_assignment, char_gt);
    auto text_gt = text_gt_labels(doc);
    if (!text_gt.empty()) report["speaker_accuracy"] = eval::label_accuracy(text_assignment, text_gt);
    report["clusters"] = roster_names.size();

    std::string rendered = report.dump(2) + "\n";
    if (!opt.out.empty()) write_file(fs::path(opt.out) / "baseline.json", rendered);
    std::cout << rendered;
    return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOptions {
    std::vector<std::string> trace_dirs;
    double split_threshold = 0.75;
    std::string out;
    bool svg = false;
    std::string doc_path;  // for --svg overlays (single-trace use)
};

int cmd_report(const ReportOptions& opt) {
    if (opt.trace_dirs.empty()) throw UsageError("report requires at least one --trace directory");

    std::map<std::string, std::vector<MetricSnapshot>> titles;
    std::map<std::string, double> rel_acc;
    std::map<std::string, PipelineTrace> traces;
    for (const auto& dir : opt.trace_dirs) {
        auto [trace, config] = load_trace(dir);
        std::string title = fs::path(dir).parent_path().filename().string();
        if (title.empty()) title = dir;
        if (titles.count(title)) title = dir;  // fall back to the full path on collision
        std::vector<MetricSnapshot> snapshots;
        for (const auto& record : trace.iterations) snapshots.push_back(record.metrics);
        if (!snapshots.empty() && snapshots.front().relationship_accuracy)
            rel_acc[title] = *snapshots.front().relationship_accuracy;
        titles[title] = std::move(snapshots);
        traces[title] = std::move(trace);
    }

    eval::SplitResult split;
    if (!rel_acc.empty() && rel_acc.size() == titles.size()) {
        split = eval::easy_hard_split(rel_acc, opt.split_threshold);
    } else {
        for (const auto& [title, snaps] : titles) split.hard.push_back(title);  // no split data: everything "hard"
    }

    json report;
    json per_title = json::object();
    for (const auto& [title, snapshots] : titles) {
        json bars = json::array();
        for (size_t i = 0; i < snapshots.size(); ++i) {
            json b;
            b["iteration"] = i;
            if (snapshots[i].speaker_accuracy) b["speaker_accuracy"] = *snapshots[i].speaker_accuracy;
            if (snapshots[i].character_accuracy) b["character_accuracy"] = *snapshots[i].character_accuracy;
            bars.push_back(std::move(b));
        }
        per_title[title] = std::move(bars);
    }
    report["per_title"] = std::move(per_title);
    report["easy"] = split.easy;
    report["hard"] = split.hard;

    std::string table = eval::render_split_table(titles, split);
    if (!opt.out.empty()) {
        write_file(fs::path(opt.out) / "comparison.json", report.dump(2) + "\n");
        write_file(fs::path(opt.out) / "comparison.txt", table);
    }
    std::cout << table;

    if (opt.svg) {
        if (opt.doc_path.empty() || opt.trace_dirs.size() != 1)
            throw UsageError("--svg requires --doc and exactly one --trace");
        if (opt.out.empty()) throw UsageError("--svg requires --out");
        ComicDocument doc = io::load_document(opt.doc_path);
        const PipelineTrace& trace = traces.begin()->second;
        const IterationRecord& last = trace.last();
        for (const auto& page : doc.pages) {
            std::string svg = eval::render_page_svg(doc, page.index, last.char_assignment, last.text_assignment);
            write_file(fs::path(opt.out) / "overlays" / ("page_" + std::to_string(page.index) + ".svg"), svg);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterative multimodal speaker prediction and character identification for comics"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value config file (CLI flags override)");

    GenOptions gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic corpus");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--titles", gen.titles, "number of titles to generate");
    gen_cmd->add_option("--title-prefix", gen.title_prefix, "title name prefix");
    gen_cmd->add_option("--pages", gen.synth.num_pages, "pages per title");
    gen_cmd->add_option("--chars-per-page", gen.synth.chars_per_page, "character regions per page");
    gen_cmd->add_option("--texts-per-page", gen.synth.texts_per_page, "text regions per page");
    gen_cmd->add_option("--roster-size", gen.synth.roster_size, "number of characters (2..26)");
    gen_cmd->add_option("--mention-prob", gen.synth.name_mention_prob, "probability a dialogue mentions a name");
    gen_cmd->add_option("--nearest-prob", gen.synth.nearest_speaker_prob, "probability the speaker is the nearest character");
    gen_cmd->add_option("--feature-dim", gen.synth.feature_dim, "feature vector dimension");
    gen_cmd->add_option("--cluster-sep", gen.synth.cluster_sep, "feature cluster separation");
    gen_cmd->add_option("--seed", gen.synth.seed, "corpus seed");

    RunOptions run;
    CLI::App* run_cmd = app.add_subcommand("run", "run the iterative pipeline");
    run_cmd->add_option("--doc", run.doc_path, "document file")->required();
    run_cmd->add_option("--features", run.features_path, "feature vectors file");
    run_cmd->add_option("--scores", run.relation.scores_path, "relationship score file (JSON-lines)");
    run_cmd->add_option("--relation", run.relation.relation, "initial relationship source: sgg|distance|gt");
    run_cmd->add_option("--gt-pairs", run.relation.gt_pairs_path, "ground-truth speaker pairs file");
    run_cmd->add_option("--backend", run.backend, "speaker backend: oracle|remote-record|remote-replay");
    run_cmd->add_option("--oracle-error", run.oracle_error, "oracle wrong-answer probability");
    run_cmd->add_option("--oracle-adopt", run.oracle_adopt, "oracle candidate adoption probability");
    run_cmd->add_option("--endpoint", run.endpoint, "chat-completion endpoint URL");
    run_cmd->add_option("--model", run.model, "remote model name");
    run_cmd->add_option("--transcript", run.transcript, "transcript file for record/replay");
    run_cmd->add_option("--auth-env", run.auth_env, "environment variable holding the bearer token");
    run_cmd->add_option("--iters", run.pipeline.iterations, "number of refinement iterations");
    run_cmd->add_option("--seed", run.pipeline.seed, "pipeline seed");
    run_cmd->add_option("--lambda", run.pipeline.rescore.lambda, "rescoring scale hyper-parameter");
    run_cmd->add_option_function<std::string>(
               "--rescore-mode",
               [&](const std::string& v) {
                   if (v == "intent")
                       run.pipeline.rescore.mode = RescoreConfig::Mode::Intent;
                   else if (v == "literal")
                       run.pipeline.rescore.mode = RescoreConfig::Mode::Literal;
                   else
                       throw CLI::ValidationError("--rescore-mode must be intent or literal");
               },
               "rescoring formula: intent|literal")
        ->default_str("intent");
    run_cmd->add_flag("--rescore-reset", run.pipeline.rescore_reset, "restart each iteration from the initial scores");
    run_cmd->add_option("--min-level", run.pipeline.min_level, "H(t->c) confidence level cutoff");
    run_cmd->add_option("--min-prob", run.pipeline.min_prob, "H(c->t) probability cutoff");
    run_cmd->add_flag("--ctx,!--no-ctx", run.pipeline.prompt.context, "inject extracted story context");
    run_cmd->add_flag("--cand,!--no-cand", run.pipeline.prompt.candidates, "supply speaker candidates to the backend");
    run_cmd->add_flag("--prob,!--no-prob", run.pipeline.prompt.show_prob, "print candidate probabilities");
    run_cmd->add_option("--prompt-lang", run.pipeline.prompt.language, "prompt template language");
    run_cmd->add_option("--roster-filter", run.pipeline.roster_filter_pct, "drop roster names below this GT share (%)");
    run_cmd->add_option("--chunk-size", run.pipeline.chunk_size, "texts per prompt chunk");
    run_cmd->add_option("--retry-budget", run.pipeline.retry_budget, "reply parse retries per chunk");
    run_cmd->add_option("--epochs", run.pipeline.classifier.epochs, "classifier epochs");
    run_cmd->add_option("--lr", run.pipeline.classifier.learning_rate, "classifier learning rate");
    run_cmd->add_option("--l2", run.pipeline.classifier.l2, "classifier L2 regularization");
    run_cmd->add_option("--val-fraction", run.pipeline.classifier.val_fraction, "classifier validation fraction");
    run_cmd->add_option("--ensemble", run.pipeline.classifier.ensemble_size, "classifier ensemble size");
    run_cmd->add_flag("--extract-roster", run.extract_roster, "extract the roster via the backend even if the document has one");
    run_cmd->add_flag("--zero-shot", run.zero_shot, "fully zero-shot mode: extract roster, score against --gt-doc");
    run_cmd->add_option("--gt-doc", run.gt_doc_path, "ground-truth document for zero-shot scoring");
    run_cmd->add_option("--name-map", run.name_map_path, "extracted-name to true-name map (JSON)");
    run_cmd->add_option("--resume", run.resume_dir, "existing trace directory to continue");
    run_cmd->add_option("--add-iters", run.add_iters, "iterations to add when resuming");
    run_cmd->add_option("--out", run.out, "output directory")->required();

    EvalOptions eval_opt;
    CLI::App* eval_cmd = app.add_subcommand("eval", "recompute metrics from a trace");
    eval_cmd->add_option("--trace", eval_opt.trace_dir, "trace directory")->required();
    eval_cmd->add_option("--doc", eval_opt.doc_path, "document file")->required();
    eval_cmd->add_option("--gt-pairs", eval_opt.gt_pairs_path, "ground-truth speaker pairs file");
    eval_cmd->add_option("--out", eval_opt.out, "output directory");

    BaselineOptions baseline;
    CLI::App* baseline_cmd = app.add_subcommand("baseline", "k-means + optimal mapping baseline");
    baseline_cmd->add_option("--doc", baseline.doc_path, "document file")->required();
    baseline_cmd->add_option("--features", baseline.features_path, "feature vectors file")->required();
    baseline_cmd->add_option("--scores", baseline.relation.scores_path, "relationship score file");
    baseline_cmd->add_option("--relation", baseline.relation.relation, "relationship source: sgg|distance|gt");
    baseline_cmd->add_option("--gt-pairs", baseline.relation.gt_pairs_path, "ground-truth speaker pairs file");
    baseline_cmd->add_option("--seed", baseline.seed, "clustering seed");
    baseline_cmd->add_option("--out", baseline.out, "output directory");

    ReportOptions report;
    CLI::App* report_cmd = app.add_subcommand("report", "aggregate one or more traces");
    report_cmd->add_option("--trace", report.trace_dirs, "trace directories")->required();
    report_cmd->add_option("--split-threshold", report.split_threshold, "easy/hard relationship accuracy threshold");
    report_cmd->add_option("--out", report.out, "output directory");
    report_cmd->add_flag("--svg", report.svg, "emit per-page SVG overlays (single trace)");
    report_cmd->add_option("--doc", report.doc_path, "document file for --svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen(gen);
        if (run_cmd->parsed()) return cmd_run(run);
        if (eval_cmd->parsed()) return cmd_eval(eval_opt);
        if (baseline_cmd->parsed()) return cmd_baseline(baseline);
        if (report_cmd->parsed()) return cmd_report(report);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const PipelineAborted& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 4;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 4;
    } catch (const ReplyParseError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 4;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
}
