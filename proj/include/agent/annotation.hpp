#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/corpus.hpp"
#include "agent/ensemble.hpp"
#include "agent/error.hpp"
#include "agent/io.hpp"
#include "agent/rng.hpp"

namespace agent::annotation {

using ensemble::EnsembleSummary;
using json = nlohmann::json;

enum class Role { Candidate, SpikedAnswerable };
enum class Label { Answerable, Unanswerable };
enum class Phase { One = 1, Two = 2 };

inline const char* to_string(Label l) { return l == Label::Answerable ? "answerable" : "unanswerable"; }
inline const char* to_string(Role r) { return r == Role::Candidate ? "candidate" : "spiked_answerable"; }

inline Label label_from_string(std::string_view s) {
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "answerable" || lower == "a") return Label::Answerable;
    if (lower == "unanswerable" || lower == "u") return Label::Unanswerable;
    throw ValidationError("unknown annotation label '" + std::string(s) + "'");
}

struct AnnotationTask {
    std::string qid;
    std::string question;
    std::string context;
    Role true_role = Role::Candidate;
};

/// Question and context text for a qid, used to materialize tasks.
struct TaskText {
    std::string question;
    std::string context;
};

struct SamplingConfig {
    std::size_t per_level = 40;
    int level_lo = 2;
    int level_hi = 6;
};

/// Draws per_level candidates uniformly from each difficulty level (n_a) in
/// [level_lo, level_hi]; tasks come out level by level in draw order.
inline std::vector<AnnotationTask> sample_for_annotation(const std::vector<EnsembleSummary>& summaries,
                                                         const std::unordered_map<std::string, TaskText>& texts,
                                                         const SamplingConfig& cfg, std::uint64_t rng_seed) {
    if (cfg.level_lo > cfg.level_hi) throw ValidationError("empty difficulty-level range");
    std::map<int, std::vector<const EnsembleSummary*>> by_level;
    for (const auto& s : summaries) by_level[s.difficulty()].push_back(&s);

    for (int level = cfg.level_lo; level <= cfg.level_hi; ++level) {
        const std::size_t have = by_level[level].size();
        if (have < cfg.per_level)
            throw ValidationError("difficulty level " + std::to_string(level) + " has only " + std::to_string(have) +
                                  " candidates; " + std::to_string(cfg.per_level) + " required");
    }

    std::vector<AnnotationTask> tasks;
    auto rng = make_rng(rng_seed);
    for (int level = cfg.level_lo; level <= cfg.level_hi; ++level) {
        const auto& pool = by_level[level];
        for (auto i : sample_without_replacement(rng, pool.size(), cfg.per_level)) {
            const auto& qid = pool[i]->qid;
            auto it = texts.find(qid);
            if (it == texts.end()) throw IntegrityError("no question/context text for candidate " + qid);
            tasks.push_back({qid, it->second.question, it->second.context, Role::Candidate});
        }
    }
    return tasks;
}

/// Inserts n verified-answerable questions at uniformly random slots.
inline std::vector<AnnotationTask> spike_answerable(const std::vector<AnnotationTask>& tasks,
                                                    const std::vector<AnnotationTask>& answerable_pool, std::size_t n,
                                                    std::uint64_t rng_seed) {
    if (answerable_pool.size() < n)
        throw ValidationError("spiking needs " + std::to_string(n) + " answerable questions; pool has " +
                              std::to_string(answerable_pool.size()));
    if (n == 0) return tasks;

    auto rng = make_rng(rng_seed);
    const auto picks = sample_without_replacement(rng, answerable_pool.size(), n);
    auto slots = sample_without_replacement(rng, tasks.size() + n, n);
    std::sort(slots.begin(), slots.end());

    std::vector<AnnotationTask> out;
    out.reserve(tasks.size() + n);
    std::size_t next_task = 0;
    std::size_t next_spike = 0;
    for (std::size_t pos = 0; pos < tasks.size() + n; ++pos) {
        if (next_spike < n && slots[next_spike] == pos) {
            auto spike = answerable_pool[picks[next_spike++]];
            spike.true_role = Role::SpikedAnswerable;
            out.push_back(std::move(spike));
        } else {
            out.push_back(tasks[next_task++]);
        }
    }
    return out;
}

/// Builds spike-pool tasks from answerable examples.
inline std::vector<AnnotationTask> answerable_tasks(const corpus::Dataset& ds) {
    const auto lookup = ds.doc_lookup();
    std::vector<AnnotationTask> out;
    for (const auto& ex : ds.examples) {
        if (!ex.is_answerable) continue;
        auto it = lookup.find(ex.context_ref);
        if (it == lookup.end()) throw IntegrityError("dangling context_ref for " + ex.qid);
        out.push_back({ex.qid, ex.question, ds.docs[it->second].text, Role::SpikedAnswerable});
    }
    return out;
}

struct AnnotationRecord {
    std::string qid;
    std::string annotator_id;
    Label phase1_label = Label::Unanswerable;
    std::string phase1_reason;
    std::optional<Label> phase2_label;  // absent means unchanged from phase 1
    std::string phase2_reason;

    Label label(Phase phase) const {
        return phase == Phase::Two && phase2_label ? *phase2_label : phase1_label;
    }
};

/// Per-qid label counts over the given phase.
struct ItemCounts {
    std::string qid;
    int answerable = 0;
    int unanswerable = 0;

    int raters() const noexcept { return answerable + unanswerable; }
};

inline std::vector<ItemCounts> count_labels(const std::vector<AnnotationRecord>& records, Phase phase) {
    std::map<std::string, ItemCounts> m;
    for (const auto& r : records) {
        auto& c = m[r.qid];
        c.qid = r.qid;
        (r.label(phase) == Label::Answerable ? c.answerable : c.unanswerable) += 1;
    }
    std::vector<ItemCounts> out;
    out.reserve(m.size());
    for (auto& [qid, c] : m) out.push_back(c);
    return out;
}

/// Items with any phase-1 disagreement; these go back to annotators in phase 2.
inline std::vector<std::string> conflicted_items(const std::vector<AnnotationRecord>& records) {
    std::vector<std::string> out;
    for (const auto& c : count_labels(records, Phase::One))
        if (c.answerable > 0 && c.unanswerable > 0) out.push_back(c.qid);
    return out;
}

/// Row of an import file: {qid, annotator_id, label, reason[, phase]}.
struct ImportRow {
    std::string qid;
    std::string annotator_id;
    Label label = Label::Unanswerable;
    std::string reason;
    Phase phase = Phase::One;
};

/// Folds phase-1 and phase-2 rows into one record per (qid, annotator).
inline std::vector<AnnotationRecord> merge_rows(const std::vector<ImportRow>& rows) {
    std::map<std::pair<std::string, std::string>, AnnotationRecord> by_key;
    for (const auto& r : rows) {
        if (r.phase != Phase::One) continue;
        auto key = std::make_pair(r.qid, r.annotator_id);
        if (by_key.count(key))
            throw IntegrityError("duplicate phase-1 label for qid " + r.qid + ", annotator " + r.annotator_id);
        by_key.emplace(std::move(key), AnnotationRecord{r.qid, r.annotator_id, r.label, r.reason, std::nullopt, {}});
    }
    for (const auto& r : rows) {
        if (r.phase != Phase::Two) continue;
        auto it = by_key.find({r.qid, r.annotator_id});
        if (it == by_key.end())
            throw IntegrityError("phase-2 label without a phase-1 label for qid " + r.qid + ", annotator " +
                                 r.annotator_id);
        it->second.phase2_label = r.label;
        it->second.phase2_reason = r.reason;
    }
    std::vector<AnnotationRecord> out;
    out.reserve(by_key.size());
    for (auto& [k, rec] : by_key) out.push_back(std::move(rec));
    return out;
}

inline ImportRow row_from_json(const json& j) {
    ImportRow r;
    try {
        r.qid = j.at("qid").get<std::string>();
        r.annotator_id = j.at("annotator_id").get<std::string>();
        r.label = label_from_string(j.at("label").get<std::string>());
        r.reason = j.value("reason", "");
        const int phase = j.value("phase", 1);
        if (phase != 1 && phase != 2) throw ValidationError("phase must be 1 or 2");
        r.phase = static_cast<Phase>(phase);
    } catch (const json::exception& e) {
        throw ParseError("$", std::string("annotation row: ") + e.what());
    }
    return r;
}

/// Reads JSON-lines, or CSV with a header naming qid, annotator_id, label, reason[, phase].
inline std::vector<ImportRow> read_rows(const std::filesystem::path& path) {
    std::vector<ImportRow> rows;
    if (path.extension() == ".csv") {
        const auto table = io::parse_csv(io::read_file(path));
        if (table.empty()) return rows;
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < table[0].size(); ++i) col[table[0][i]] = i;
        for (const char* need : {"qid", "annotator_id", "label"})
            if (!col.count(need)) throw ParseError(path.string() + ":header", std::string("missing column ") + need);
        for (std::size_t r = 1; r < table.size(); ++r) {
            const auto& row = table[r];
            const auto cell = [&](const char* name) -> std::string {
                auto it = col.find(name);
                return it != col.end() && it->second < row.size() ? row[it->second] : std::string{};
            };
            json j{{"qid", cell("qid")}, {"annotator_id", cell("annotator_id")}, {"label", cell("label")},
                   {"reason", cell("reason")}};
            if (const auto p = cell("phase"); !p.empty()) j["phase"] = std::stoi(p);
            rows.push_back(row_from_json(j));
        }
        return rows;
    }
    for (const auto& j : io::read_jsonl(path)) rows.push_back(row_from_json(j));
    return rows;
}

inline std::vector<AnnotationRecord> load_records(const std::vector<std::filesystem::path>& paths) {
    std::vector<ImportRow> rows;
    for (const auto& p : paths) {
        auto part = read_rows(p);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return merge_rows(rows);
}

struct KappaReport {
    double kappa = 0.0;
    double p_bar = 0.0;    // mean per-item agreement
    double p_bar_e = 0.0;  // chance agreement
    std::size_t n_items = 0;
    int n_raters = 0;
};

/// Fleiss' kappa over two categories. Every item must carry the same number of ratings r >= 2.
inline KappaReport fleiss_kappa(const std::vector<ItemCounts>& items) {
    if (items.empty()) throw ValidationError("fleiss_kappa needs at least one item");
    const int r = items.front().raters();
    if (r < 2) throw ValidationError("fleiss_kappa needs at least 2 raters per item");
    for (const auto& it : items)
        if (it.raters() != r)
            throw ValidationError("unequal rater counts: item " + it.qid + " has " + std::to_string(it.raters()) +
                                  ", expected " + std::to_string(r));

    // Integer sums keep kappa a single rounding away from the exact rational value.
    std::int64_t agree = 0;  // sum over items of a(a-1) + u(u-1)
    std::int64_t total_a = 0;
    std::int64_t total_u = 0;
    for (const auto& it : items) {
        agree += std::int64_t{it.answerable} * (it.answerable - 1) + std::int64_t{it.unanswerable} * (it.unanswerable - 1);
        total_a += it.answerable;
        total_u += it.unanswerable;
    }
    const std::int64_t n = static_cast<std::int64_t>(items.size());
    const std::int64_t nr = n * r;
    const std::int64_t chance = total_a * total_a + total_u * total_u;  // p_bar_e * (N r)^2

    KappaReport rep;
    rep.n_items = items.size();
    rep.n_raters = r;
    rep.p_bar = static_cast<double>(agree) / static_cast<double>(nr * (r - 1));
    rep.p_bar_e = static_cast<double>(chance) / static_cast<double>(nr * nr);
    // kappa = (P - Pe) / (1 - Pe), scaled through by (N r)^2 (r - 1).
    const std::int64_t num = agree * nr - chance * (r - 1);
    const std::int64_t den = (nr * nr - chance) * (r - 1);
    if (den == 0) {
        if (num != 0) throw ValidationError("degenerate kappa: chance agreement is 1");
        rep.kappa = 1.0;
    } else {
        rep.kappa = static_cast<double>(num) / static_cast<double>(den);
    }
    return rep;
}

inline KappaReport fleiss_kappa(const std::vector<AnnotationRecord>& records, Phase phase) {
    return fleiss_kappa(count_labels(records, phase));
}

/// Item-level verdict: Answerable when answerable votes are at least half.
/// Ties count as Answerable (the conservative reading for data error).
inline Label majority(const ItemCounts& c) { return 2 * c.answerable >= c.raters() ? Label::Answerable : Label::Unanswerable; }

/// Fraction of candidate items whose majority verdict in `phase` is Answerable.
inline double error_rate(const std::vector<AnnotationRecord>& records, Phase phase,
                         const std::set<std::string>& exclude = {}) {
    std::size_t n = 0;
    std::size_t errors = 0;
    for (const auto& c : count_labels(records, phase)) {
        if (exclude.count(c.qid)) continue;
        ++n;
        if (majority(c) == Label::Answerable) ++errors;
    }
    if (n == 0) throw ValidationError("error_rate needs at least one candidate item");
    return double(errors) / double(n);
}

inline json task_export_json(const AnnotationTask& t) {
    return {{"qid", t.qid}, {"question", t.question}, {"context", t.context}};
}

inline json to_json(const KappaReport& k) {
    return {{"kappa", k.kappa}, {"p_bar", k.p_bar}, {"p_bar_e", k.p_bar_e}, {"n_items", k.n_items}, {"n_raters", k.n_raters}};
}

}  // namespace agent::annotation
