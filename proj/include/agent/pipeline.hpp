#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/annotation.hpp"
#include "agent/corpus.hpp"
#include "agent/ensemble.hpp"
#include "agent/error.hpp"
#include "agent/evaluator.hpp"
#include "agent/filter.hpp"
#include "agent/io.hpp"
#include "agent/retriever.hpp"
#include "agent/rng.hpp"
#include "agent/textbugger.hpp"

namespace agent::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class DatasetKind { Squad, Hotpot };

enum class Stage {
    Ingest,
    Index,
    Candidates,
    SampleTrain,
    MarkChallenging,
    SampleAnnotation,
    TuneFilter,
    ApplyFilter,
    Emit,
    Evaluate,
    Kappa,
    Attack,
};

inline constexpr std::array<std::pair<Stage, std::string_view>, 12> kStageNames{{
    {Stage::Ingest, "ingest"},
    {Stage::Index, "index"},
    {Stage::Candidates, "candidates"},
    {Stage::SampleTrain, "sample-train"},
    {Stage::MarkChallenging, "mark-challenging"},
    {Stage::SampleAnnotation, "sample-annotation"},
    {Stage::TuneFilter, "tune-filter"},
    {Stage::ApplyFilter, "apply-filter"},
    {Stage::Emit, "emit"},
    {Stage::Evaluate, "evaluate"},
    {Stage::Kappa, "kappa"},
    {Stage::Attack, "attack"},
}};

inline std::string_view to_string(Stage s) {
    for (const auto& [stage, name] : kStageNames)
        if (stage == s) return name;
    return "unknown";
}

inline std::optional<Stage> stage_from_string(std::string_view name) {
    for (const auto& [stage, n] : kStageNames)
        if (n == name) return stage;
    return std::nullopt;
}

/// Artifact file names inside the work directory.
namespace artifact {
inline constexpr const char* kDataset = "dataset.squad2.json";
inline constexpr const char* kHotpotRecords = "hotpot_records.json";
inline constexpr const char* kIndex = "index.bin";
inline constexpr const char* kCandidates = "candidates.jsonl";
inline constexpr const char* kCandidateSet = "candidates.squad2.json";
inline constexpr const char* kAdversarialTrain = "adversarial_train.squad2.json";
inline constexpr const char* kHeldOut = "held_out.squad2.json";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kSummaries = "summaries.jsonl";
inline constexpr const char* kChallenging = "challenging.jsonl";
inline constexpr const char* kChallengingSet = "challenging.squad2.json";
inline constexpr const char* kAnnotationTasks = "annotation_tasks.jsonl";
inline constexpr const char* kAnnotationKey = "annotation_key.json";
inline constexpr const char* kFilterParams = "filter_params.json";
inline constexpr const char* kTuneReport = "tune_report.json";
inline constexpr const char* kFilterOutput = "filter_output.jsonl";
inline constexpr const char* kFinal = "agent.squad2.json";
inline constexpr const char* kKappa = "kappa.json";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

struct PipelineConfig {
    DatasetKind kind = DatasetKind::Squad;
    std::size_t k = 10;
    double ratio = 0.5;
    int min_votes = 2;
    double grid_step = 0.01;
    double grid_hi = 2.0;
    std::size_t per_level = 40;
    int level_lo = 2;
    int level_hi = 6;
    std::size_t spikes = 20;
    std::size_t num_attack = 1;
    std::uint64_t seed = 0;

    fs::path workdir = ".";
    fs::path input;                         // ingest source
    fs::path dataset;                       // evaluate / attack source
    fs::path output;                        // evaluate / attack / emit destination override
    std::vector<fs::path> predictions;      // mark-challenging / evaluate
    std::vector<fs::path> annotations;      // tune-filter / kappa

    /// Range checks; runs before any I/O.
    void validate() const {
        if (k < 1) throw ValidationError("--k must be >= 1");
        if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("--ratio must be in (0, 1]");
        if (min_votes < 1) throw ValidationError("--min-votes must be >= 1");
        filter::GridSpec{grid_step, grid_hi}.points();
        if (per_level < 1) throw ValidationError("--per-level must be >= 1");
        if (level_lo < 0 || level_lo > level_hi) throw ValidationError("difficulty levels must satisfy 0 <= lo <= hi");
        if (num_attack < 1) throw ValidationError("--num-attack must be >= 1");
    }

    fs::path at(const char* name) const { return workdir / name; }
};

struct StageResult {
    std::size_t count = 0;
    std::string message;
};

namespace detail {

inline void require_artifact(const PipelineConfig& cfg, const char* name, Stage producer) {
    if (!fs::exists(cfg.at(name)))
        throw DependencyError("missing " + cfg.at(name).string() + "; run stage '" + std::string(to_string(producer)) +
                              "' first");
}

inline corpus::DatasetManifest load_manifest(const PipelineConfig& cfg) {
    const auto path = cfg.at(artifact::kManifest);
    if (!fs::exists(path)) return {};
    return corpus::DatasetManifest::from_json(io::read_json(path));
}

inline void record(const PipelineConfig& cfg, Stage stage, std::size_t count, std::uint64_t seed, json params) {
    auto m = load_manifest(cfg);
    m.upsert({std::string(to_string(stage)), count, seed, std::move(params)});
    io::write_json(cfg.at(artifact::kManifest), m.to_json());
}

inline corpus::Dataset load_v2(const fs::path& p) { return corpus::load_squad(p, corpus::SquadVersion::v2_0); }

inline std::vector<ensemble::EnsembleSummary> read_summaries(const fs::path& p) {
    std::vector<ensemble::EnsembleSummary> out;
    for (const auto& row : io::read_jsonl(p)) out.push_back(ensemble::summary_from_json(row));
    return out;
}

inline void write_summaries(const fs::path& p, const std::vector<ensemble::EnsembleSummary>& ss) {
    std::vector<json> rows;
    rows.reserve(ss.size());
    for (const auto& s : ss) rows.push_back(ensemble::to_json(s));
    io::write_jsonl(p, rows);
}

/// Subset of `ds` whose qids are in `keep`, in dataset order.
inline corpus::Dataset subset(const corpus::Dataset& ds, const std::unordered_set<std::string>& keep,
                              std::optional<corpus::Origin> relabel = std::nullopt) {
    corpus::Dataset out;
    out.docs = ds.docs;
    for (const auto& ex : ds.examples) {
        if (!keep.count(ex.qid)) continue;
        out.examples.push_back(ex);
        if (relabel) out.examples.back().origin = *relabel;
    }
    return out;
}

/// Spikes listed in the annotation key, excluded from candidate statistics.
inline std::set<std::string> spiked_qids(const PipelineConfig& cfg) {
    std::set<std::string> out;
    const auto path = cfg.at(artifact::kAnnotationKey);
    if (!fs::exists(path)) return out;
    const auto key = io::read_json(path);
    for (const auto& [qid, role] : key.items())
        if (role.get<std::string>() == annotation::to_string(annotation::Role::SpikedAnswerable)) out.insert(qid);
    return out;
}

inline std::vector<annotation::AnnotationRecord> load_annotations(const PipelineConfig& cfg, Stage stage) {
    if (cfg.annotations.empty())
        throw ValidationError("stage '" + std::string(to_string(stage)) + "' requires --annotations");
    return annotation::load_records(cfg.annotations);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

inline StageResult run_ingest(const PipelineConfig& cfg) {
    if (cfg.input.empty()) throw ValidationError("ingest requires --input");
    const auto seed = derive_seed(cfg.seed, "ingest");
    json params{{"kind", cfg.kind == DatasetKind::Squad ? "squad" : "hotpot"}, {"input", cfg.input.filename().string()}};
    corpus::Dataset ds;
    if (cfg.kind == DatasetKind::Squad) {
        // Accept v1.1 or answerable-only v2.0 files; unanswerable rows are dropped.
        auto loaded = corpus::load_squad(cfg.input, corpus::SquadVersion::v2_0);
        ds.docs = std::move(loaded.docs);
        std::size_t dropped = 0;
        for (auto& ex : loaded.examples) {
            if (ex.is_answerable)
                ds.examples.push_back(std::move(ex));
            else
                ++dropped;
        }
        params["dropped_unanswerable"] = dropped;
    } else {
        auto records = corpus::load_hotpot(cfg.input);
        corpus::SkipReport skips;
        for (const auto& rec : records) {
            if (auto conv = corpus::convert_hotpot_answerable(rec, &skips)) {
                ds.docs.push_back(std::move(conv->first));
                ds.examples.push_back(std::move(conv->second));
            }
        }
        params["skipped"] = skips.skipped;
        params["paragraph_join"] = std::string(corpus::kParagraphJoin);
        io::write_json(cfg.at(artifact::kHotpotRecords), io::read_json(cfg.input));
    }
    corpus::emit_squad2(ds, cfg.at(artifact::kDataset));
    detail::record(cfg, Stage::Ingest, ds.examples.size(), seed, params);
    return {ds.examples.size(), "ingested " + std::to_string(ds.examples.size()) + " answerable questions"};
}

inline StageResult run_index(const PipelineConfig& cfg) {
    if (cfg.kind != DatasetKind::Squad)
        throw ValidationError("index is only used for squad datasets; hotpot candidates pair distractors directly");
    detail::require_artifact(cfg, artifact::kDataset, Stage::Ingest);
    const auto ds = detail::load_v2(cfg.at(artifact::kDataset));
    const auto index = retriever::build_index(ds.docs);
    retriever::save_index(index, cfg.at(artifact::kIndex));
    detail::record(cfg, Stage::Index, index.size(), derive_seed(cfg.seed, "index"),
                   {{"documents", index.size()}, {"terms", index.terms().size()}});
    return {index.size(), "indexed " + std::to_string(index.size()) + " contexts"};
}

inline StageResult run_candidates(const PipelineConfig& cfg) {
    std::vector<retriever::CandidatePair> cands;
    corpus::Dataset candidate_set;
    json params;
    if (cfg.kind == DatasetKind::Squad) {
        detail::require_artifact(cfg, artifact::kDataset, Stage::Ingest);
        detail::require_artifact(cfg, artifact::kIndex, Stage::Index);
        const auto ds = detail::load_v2(cfg.at(artifact::kDataset));
        const auto index = retriever::load_index(cfg.at(artifact::kIndex));
        cands = retriever::generate_candidates_squad(ds.examples, {cfg.k}, index);
        candidate_set.docs = ds.docs;
        params = {{"k", cfg.k}};
    } else {
        detail::require_artifact(cfg, artifact::kDataset, Stage::Ingest);
        detail::require_artifact(cfg, artifact::kHotpotRecords, Stage::Ingest);
        const auto ds = detail::load_v2(cfg.at(artifact::kDataset));
        std::unordered_set<std::string> kept_qids;
        for (const auto& ex : ds.examples) kept_qids.insert(ex.qid);
        std::vector<corpus::HotpotRecord> records;
        for (auto& rec : corpus::load_hotpot(cfg.at(artifact::kHotpotRecords)))
            if (kept_qids.count(rec.qid)) records.push_back(std::move(rec));
        auto hc = retriever::generate_candidates_hotpot(records);
        cands = std::move(hc.candidates);
        candidate_set.docs = std::move(hc.docs);
        params = {{"paragraph_join", std::string(corpus::kParagraphJoin)}};
    }

    const auto source = detail::load_v2(cfg.at(artifact::kDataset));
    std::unordered_map<std::string, const corpus::QAExample*> by_qid;
    for (const auto& ex : source.examples) by_qid.emplace(ex.qid, &ex);
    const auto src_docs = source.doc_lookup();
    const auto cand_docs = candidate_set.doc_lookup();
    for (const auto& c : cands) {
        const auto* orig = by_qid.at(c.qid);
        const auto& new_text = candidate_set.docs[cand_docs.at(c.new_doc_id)].text;
        if (new_text == source.docs[src_docs.at(orig->context_ref)].text)
            throw IntegrityError("candidate for " + c.qid + " reuses the original context text");
        corpus::QAExample ex;
        ex.qid = c.candidate_id();
        ex.question = orig->question;
        ex.context_ref = c.new_doc_id;
        ex.is_answerable = false;
        ex.origin = corpus::Origin::Candidate;
        candidate_set.examples.push_back(std::move(ex));
    }
    retriever::write_candidates(cfg.at(artifact::kCandidates), cands);
    corpus::emit_squad2(candidate_set, cfg.at(artifact::kCandidateSet));
    detail::record(cfg, Stage::Candidates, cands.size(), derive_seed(cfg.seed, "candidates"), params);
    return {cands.size(), "generated " + std::to_string(cands.size()) + " unanswerable candidates"};
}

inline StageResult run_sample_train(const PipelineConfig& cfg) {
    detail::require_artifact(cfg, artifact::kDataset, Stage::Ingest);
    detail::require_artifact(cfg, artifact::kCandidateSet, Stage::Candidates);
    const auto ds = detail::load_v2(cfg.at(artifact::kDataset));
    const auto cands = detail::load_v2(cfg.at(artifact::kCandidateSet));
    std::vector<std::string> answerable;
    for (const auto& ex : ds.examples) answerable.push_back(ex.qid);
    std::vector<std::string> candidate_ids;
    for (const auto& ex : cands.examples) candidate_ids.push_back(ex.qid);

    const auto seed = derive_seed(cfg.seed, "sample-train");
    const auto split = ensemble::sample_adversarial_training(answerable, candidate_ids, cfg.ratio, seed);

    // Adversarial fine-tuning set: all answerable questions plus the sampled candidates.
    const std::unordered_set<std::string> train_u(split.train_unanswerable.begin(), split.train_unanswerable.end());
    const std::unordered_set<std::string> held(split.held_out_candidates.begin(), split.held_out_candidates.end());
    corpus::Dataset train = ds;
    const auto lookup = train.doc_lookup();
    for (const auto& doc : cands.docs)
        if (!lookup.count(doc.doc_id)) train.docs.push_back(doc);
    for (const auto& ex : cands.examples)
        if (train_u.count(ex.qid)) train.examples.push_back(ex);
    corpus::emit_squad2(train, cfg.at(artifact::kAdversarialTrain));
    corpus::emit_squad2(detail::subset(cands, held), cfg.at(artifact::kHeldOut));
    io::write_json(cfg.at(artifact::kSplit), {{"train_answerable", split.train_answerable.size()},
                                             {"train_unanswerable", split.train_unanswerable},
                                             {"held_out", split.held_out_candidates}});
    detail::record(cfg, Stage::SampleTrain, split.held_out_candidates.size(), seed,
                   {{"ratio", cfg.ratio},
                    {"train_answerable", split.train_answerable.size()},
                    {"train_unanswerable", split.train_unanswerable.size()}});
    return {split.held_out_candidates.size(),
            "sampled " + std::to_string(split.train_unanswerable.size()) + " candidates for adversarial training; " +
                std::to_string(split.held_out_candidates.size()) + " held out"};
}

inline StageResult run_mark_challenging(const PipelineConfig& cfg) {
    detail::require_artifact(cfg, artifact::kSplit, Stage::SampleTrain);
    detail::require_artifact(cfg, artifact::kHeldOut, Stage::SampleTrain);
    if (cfg.predictions.empty()) throw ValidationError("mark-challenging requires --predictions (one file per model)");
    const auto split = io::read_json(cfg.at(artifact::kSplit));
    const auto held = split.at("held_out").get<std::vector<std::string>>();
    const auto verdicts = ensemble::load_predictions(cfg.predictions, held);

    std::vector<ensemble::EnsembleSummary> summaries;
    summaries.reserve(held.size());
    for (const auto& qid : held) summaries.push_back(ensemble::summarize(verdicts.at(qid)));
    const auto challenging_ids = ensemble::mark_challenging(summaries, cfg.min_votes);
    const std::unordered_set<std::string> chosen(challenging_ids.begin(), challenging_ids.end());
    std::vector<ensemble::EnsembleSummary> challenging;
    for (const auto& s : summaries)
        if (chosen.count(s.qid)) challenging.push_back(s);

    detail::write_summaries(cfg.at(artifact::kSummaries), summaries);
    detail::write_summaries(cfg.at(artifact::kChallenging), challenging);
    corpus::emit_squad2(detail::subset(detail::load_v2(cfg.at(artifact::kHeldOut)), chosen),
                        cfg.at(artifact::kChallengingSet));
    detail::record(cfg, Stage::MarkChallenging, challenging.size(), derive_seed(cfg.seed, "mark-challenging"),
                   {{"min_votes", cfg.min_votes}, {"models", cfg.predictions.size()}, {"scored", summaries.size()}});
    return {challenging.size(), std::to_string(challenging.size()) + " challenging candidates"};
}

inline StageResult run_sample_annotation(const PipelineConfig& cfg) {
    detail::require_artifact(cfg, artifact::kChallenging, Stage::MarkChallenging);
    detail::require_artifact(cfg, artifact::kChallengingSet, Stage::MarkChallenging);
    detail::require_artifact(cfg, artifact::kDataset, Stage::Ingest);
    const auto summaries = detail::read_summaries(cfg.at(artifact::kChallenging));
    const auto set = detail::load_v2(cfg.at(artifact::kChallengingSet));
    const auto docs = set.doc_lookup();
    std::unordered_map<std::string, annotation::TaskText> texts;
    for (const auto& ex : set.examples) texts[ex.qid] = {ex.question, set.docs[docs.at(ex.context_ref)].text};

    const auto seed = derive_seed(cfg.seed, "sample-annotation");
    auto tasks = annotation::sample_for_annotation(summaries, texts, {cfg.per_level, cfg.level_lo, cfg.level_hi}, seed);
    const auto pool = annotation::answerable_tasks(detail::load_v2(cfg.at(artifact::kDataset)));
    tasks = annotation::spike_answerable(tasks, pool, cfg.spikes, splitmix64(seed));

    std::vector<json> rows;
    json key = json::object();
    for (const auto& t : tasks) {
        rows.push_back(annotation::task_export_json(t));
        key[t.qid] = annotation::to_string(t.true_role);
    }
    io::write_jsonl(cfg.at(artifact::kAnnotationTasks), rows);
    io::write_json(cfg.at(artifact::kAnnotationKey), key);
    detail::record(cfg, Stage::SampleAnnotation, tasks.size(), seed,
                   {{"per_level", cfg.per_level}, {"levels", {cfg.level_lo, cfg.level_hi}}, {"spikes", cfg.spikes}});
    return {tasks.size(), "exported " + std::to_string(tasks.size()) + " annotation tasks"};
}

/// Expert verdicts joined with ensemble summaries; spikes are excluded.
inline std::vector<filter::AnnotatedItem> tuning_items(const PipelineConfig& cfg,
                                                       const std::vector<annotation::AnnotationRecord>& records) {
    const auto spikes = detail::spiked_qids(cfg);
    std::unordered_map<std::string, ensemble::EnsembleSummary> by_qid;
    for (auto& s : detail::read_summaries(cfg.at(artifact::kSummaries))) by_qid.emplace(s.qid, std::move(s));
    std::vector<filter::AnnotatedItem> items;
    for (const auto& c : annotation::count_labels(records, annotation::Phase::Two)) {
        if (spikes.count(c.qid)) continue;
        auto it = by_qid.find(c.qid);
        if (it == by_qid.end()) throw IntegrityError("annotated qid " + c.qid + " has no ensemble summary");
        items.push_back({it->second, annotation::majority(c) == annotation::Label::Answerable});
    }
    return items;
}

inline StageResult run_tune_filter(const PipelineConfig& cfg) {
    detail::require_artifact(cfg, artifact::kSummaries, Stage::MarkChallenging);
    const auto records = detail::load_annotations(cfg, Stage::TuneFilter);
    const auto items = tuning_items(cfg, records);
    const auto report = filter::tune(items, {cfg.grid_step, cfg.grid_hi});
    const std::string tuned_on = std::to_string(items.size()) + " annotated candidates";
    io::write_json(cfg.at(artifact::kFilterParams), filter::to_json(report.params, cfg.grid_step, tuned_on));
    io::write_json(cfg.at(artifact::kTuneReport), {{"alpha", report.params.alpha},
                                                  {"beta", report.params.beta},
                                                  {"threshold", *report.params.threshold},
                                                  {"recall", report.recall},
                                                  {"tuning_size", report.tuning_size},
                                                  {"n_unanswerable", report.n_unanswerable}});
    detail::record(cfg, Stage::TuneFilter, items.size(), derive_seed(cfg.seed, "tune-filter"),
                   {{"grid_step", cfg.grid_step}, {"alpha", report.params.alpha}, {"beta", report.params.beta},
                    {"recall", report.recall}});
    return {items.size(), "alpha=" + std::to_string(report.params.alpha) + " beta=" +
                              std::to_string(report.params.beta) + " recall=" + std::to_string(report.recall)};
}

inline StageResult run_apply_filter(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.at(artifact::kFilterParams)))
        throw DependencyError("apply-filter requires filter params from tune-filter (missing " +
                              cfg.at(artifact::kFilterParams).string() + ")");
    detail::require_artifact(cfg, artifact::kChallenging, Stage::MarkChallenging);
    const auto params = filter::params_from_json(io::read_json(cfg.at(artifact::kFilterParams)));
    const auto summaries = detail::read_summaries(cfg.at(artifact::kChallenging));
    const auto out = filter::apply_filter(summaries, params);
    std::vector<json> rows;
    const std::unordered_set<std::string> kept(out.kept.begin(), out.kept.end());
    for (std::size_t i = 0; i < summaries.size(); ++i)
        rows.push_back({{"qid", summaries[i].qid}, {"V", out.values[i]}, {"kept", kept.count(summaries[i].qid) > 0}});
    io::write_jsonl(cfg.at(artifact::kFilterOutput), rows);
    detail::record(cfg, Stage::ApplyFilter, out.kept.size(), derive_seed(cfg.seed, "apply-filter"),
                   {{"alpha", params.alpha}, {"beta", params.beta}, {"threshold", *params.threshold},
                    {"discarded", out.discarded.size()}});
    return {out.kept.size(), std::to_string(out.kept.size()) + " kept, " + std::to_string(out.discarded.size()) +
                                 " discarded"};
}

inline StageResult run_emit(const PipelineConfig& cfg) {
    detail::require_artifact(cfg, artifact::kFilterOutput, Stage::ApplyFilter);
    detail::require_artifact(cfg, artifact::kChallengingSet, Stage::MarkChallenging);
    std::unordered_set<std::string> kept;
    for (const auto& row : io::read_jsonl(cfg.at(artifact::kFilterOutput)))
        if (row.at("kept").get<bool>()) kept.insert(row.at("qid").get<std::string>());
    const auto final_set =
        detail::subset(detail::load_v2(cfg.at(artifact::kChallengingSet)), kept, corpus::Origin::Final);
    const auto dest = cfg.output.empty() ? cfg.at(artifact::kFinal) : cfg.output;
    corpus::emit_squad2(final_set, dest);
    detail::record(cfg, Stage::Emit, final_set.examples.size(), derive_seed(cfg.seed, "emit"),
                   {{"output", dest.filename().string()}});
    return {final_set.examples.size(), "wrote " + std::to_string(final_set.examples.size()) + " questions to " +
                                           dest.string()};
}

inline StageResult run_evaluate(const PipelineConfig& cfg) {
    if (cfg.dataset.empty()) throw ValidationError("evaluate requires --dataset");
    if (cfg.predictions.empty()) throw ValidationError("evaluate requires --predictions");
    const auto ds = detail::load_v2(cfg.dataset);
    std::vector<evaluator::EvalReport> reports;
    json models = json::object();
    for (const auto& p : cfg.predictions) {
        const auto preds = evaluator::load_predictions(p);
        reports.push_back(evaluator::evaluate_dataset(ds.examples, preds));
        models[p.filename().string()] = evaluator::to_json(reports.back());
    }
    json aggregate = json::object();
    for (const auto& [split, ms] : evaluator::aggregate_models(reports))
        aggregate[split] = {{"mean_f1", ms.mean}, {"std_f1", ms.std}};
    const json report{{"models", models}, {"aggregate", aggregate}, {"std", "population"}};
    const auto dest = cfg.output.empty() ? cfg.at(artifact::kEvalReport) : cfg.output;
    io::write_json(dest, report);
    return {ds.examples.size(), report["aggregate"].dump()};
}

inline StageResult run_kappa(const PipelineConfig& cfg) {
    const auto records = detail::load_annotations(cfg, Stage::Kappa);
    const auto spikes = detail::spiked_qids(cfg);
    json out = json::object();
    for (auto phase : {annotation::Phase::One, annotation::Phase::Two}) {
        const std::string key = phase == annotation::Phase::One ? "phase1" : "phase2";
        out[key] = annotation::to_json(annotation::fleiss_kappa(records, phase));
        out[key]["error_rate"] = annotation::error_rate(records, phase, spikes);
    }
    out["conflicted"] = annotation::conflicted_items(records);
    io::write_json(cfg.at(artifact::kKappa), out);
    return {annotation::count_labels(records, annotation::Phase::One).size(), out["phase2"].dump()};
}

inline StageResult run_attack(const PipelineConfig& cfg) {
    if (cfg.dataset.empty()) throw ValidationError("attack requires --dataset");
    const auto ds = detail::load_v2(cfg.dataset);
    textbugger::AttackConfig acfg;
    acfg.num_attack = cfg.num_attack;
    acfg.rng_seed = derive_seed(cfg.seed, "attack");
    const auto res = textbugger::attack_dataset(ds, acfg);
    const auto dest = cfg.output.empty() ? cfg.workdir / ("attacked_" + std::to_string(cfg.num_attack) + ".squad2.json")
                                         : cfg.output;
    corpus::emit_squad2(res.dataset, dest);
    auto sidecar = dest;
    sidecar += ".edits.json";
    io::write_json(sidecar, res.sidecar);
    return {res.attacked, "attacked " + std::to_string(res.attacked) + " questions (" + std::to_string(res.skipped) +
                              " without eligible tokens)"};
}

inline StageResult run_stage(Stage stage, const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.workdir);
    switch (stage) {
        case Stage::Ingest: return run_ingest(cfg);
        case Stage::Index: return run_index(cfg);
        case Stage::Candidates: return run_candidates(cfg);
        case Stage::SampleTrain: return run_sample_train(cfg);
        case Stage::MarkChallenging: return run_mark_challenging(cfg);
        case Stage::SampleAnnotation: return run_sample_annotation(cfg);
        case Stage::TuneFilter: return run_tune_filter(cfg);
        case Stage::ApplyFilter: return run_apply_filter(cfg);
        case Stage::Emit: return run_emit(cfg);
        case Stage::Evaluate: return run_evaluate(cfg);
        case Stage::Kappa: return run_kappa(cfg);
        case Stage::Attack: return run_attack(cfg);
    }
    throw ValidationError("unknown stage");
}

}  // namespace agent::pipeline
