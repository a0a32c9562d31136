#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/error.hpp"
#include "agent/io.hpp"
#include "agent/rng.hpp"
#include "agent/unicode.hpp"

namespace agent::corpus {

using json = nlohmann::json;

struct ContextDoc {
    std::string doc_id;
    std::string title;
    std::string text;

    bool operator==(const ContextDoc&) const = default;
};

/// `answer_start` counts code points, as in the public SQuAD files.
struct AnswerSpan {
    std::string text;
    std::size_t answer_start = 0;

    bool operator==(const AnswerSpan&) const = default;
};

enum class Origin { Original, Candidate, Final, Attacked };

inline const char* to_string(Origin o) {
    switch (o) {
        case Origin::Original: return "original";
        case Origin::Candidate: return "agent_candidate";
        case Origin::Final: return "agent_final";
        case Origin::Attacked: return "attacked";
    }
    return "original";
}

inline std::optional<Origin> origin_from_string(std::string_view s) {
    if (s == "original") return Origin::Original;
    if (s == "agent_candidate") return Origin::Candidate;
    if (s == "agent_final") return Origin::Final;
    if (s == "attacked") return Origin::Attacked;
    return std::nullopt;
}

struct QAExample {
    std::string qid;
    std::string question;
    std::string context_ref;
    std::vector<AnswerSpan> answers;  // empty iff unanswerable
    bool is_answerable = true;
    Origin origin = Origin::Original;
};

struct Dataset {
    std::vector<ContextDoc> docs;
    std::vector<QAExample> examples;

    /// doc_id -> index into docs.
    std::unordered_map<std::string, std::size_t> doc_lookup() const {
        std::unordered_map<std::string, std::size_t> m;
        m.reserve(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) m.emplace(docs[i].doc_id, i);
        return m;
    }
};

enum class SquadVersion { v1_1, v2_0 };

/// Paragraph delimiter used when HotpotQA paragraphs are concatenated into one context.
inline constexpr std::string_view kParagraphJoin = " ";

/// Zero-padded so lexical order equals load order.
inline std::string make_doc_id(std::size_t ordinal) {
    std::string digits = std::to_string(ordinal);
    if (digits.size() < 7) digits.insert(0, 7 - digits.size(), '0');
    return "ctx-" + digits;
}

/// True when the span's text sits at its offset in `context`.
inline bool span_matches(std::string_view context, const AnswerSpan& span) {
    const auto begin = unicode::byte_offset(context, span.answer_start);
    if (begin == std::string_view::npos) return false;
    return context.substr(begin, span.text.size()) == span.text;
}

/// Validates every answer span; throws IntegrityError listing offending qids.
inline void validate_spans(const Dataset& ds) {
    const auto lookup = ds.doc_lookup();
    std::vector<std::string> bad;
    for (const auto& ex : ds.examples) {
        auto it = lookup.find(ex.context_ref);
        if (it == lookup.end()) continue;
        for (const auto& a : ex.answers) {
            if (!span_matches(ds.docs[it->second].text, a)) {
                bad.push_back(ex.qid);
                break;
            }
        }
    }
    if (!bad.empty()) {
        std::string msg = "answer span does not match context for qid(s):";
        for (const auto& q : bad) msg += " " + q;
        throw IntegrityError(msg);
    }
}

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path, "expected object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key, "missing field");
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_string()) throw ParseError(path + "." + key, "expected string");
    return v.get<std::string>();
}

inline const json& require_array(const json& obj, const char* key, const std::string& path) {
    const auto& v = require(obj, key, path);
    if (!v.is_array()) throw ParseError(path + "." + key, "expected array");
    return v;
}

inline std::string qid_string(const json& v, const std::string& path) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ParseError(path, "expected string id");
}

}  // namespace detail

/// Parses an in-memory SQuAD document. Identical (title, context) paragraphs collapse to one doc.
inline Dataset parse_squad(const json& root, SquadVersion version) {
    using detail::require_array;
    using detail::require_string;

    Dataset ds;
    std::map<std::pair<std::string, std::string>, std::size_t> seen;
    std::set<std::string> qids;
    std::vector<std::string> bad_spans;

    const auto& data = require_array(root, "data", "$");
    for (std::size_t a = 0; a < data.size(); ++a) {
        const std::string apath = "$.data[" + std::to_string(a) + "]";
        const auto& article = data[a];
        std::string title;
        if (article.is_object() && article.contains("title")) {
            if (!article["title"].is_string()) throw ParseError(apath + ".title", "expected string");
            title = article["title"].get<std::string>();
        }
        const auto& paragraphs = require_array(article, "paragraphs", apath);
        for (std::size_t p = 0; p < paragraphs.size(); ++p) {
            const std::string ppath = apath + ".paragraphs[" + std::to_string(p) + "]";
            const auto& para = paragraphs[p];
            std::string context = require_string(para, "context", ppath);
            if (context.empty()) throw ParseError(ppath + ".context", "empty context");

            auto [found, inserted] = seen.emplace(std::make_pair(title, context), ds.docs.size());
            if (inserted) ds.docs.push_back({make_doc_id(ds.docs.size()), title, std::move(context)});
            const std::string doc_id = ds.docs[found->second].doc_id;
            const std::string& ctx = ds.docs[found->second].text;

            const auto& qas = require_array(para, "qas", ppath);
            for (std::size_t q = 0; q < qas.size(); ++q) {
                const std::string qpath = ppath + ".qas[" + std::to_string(q) + "]";
                const auto& qa = qas[q];
                QAExample ex;
                ex.qid = detail::qid_string(detail::require(qa, "id", qpath), qpath + ".id");
                ex.question = require_string(qa, "question", qpath);
                ex.context_ref = doc_id;
                if (!qids.insert(ex.qid).second) throw ParseError(qpath + ".id", "duplicate qid " + ex.qid);

                bool impossible = false;
                if (version == SquadVersion::v2_0 && qa.contains("is_impossible")) {
                    if (!qa["is_impossible"].is_boolean()) throw ParseError(qpath + ".is_impossible", "expected boolean");
                    impossible = qa["is_impossible"].get<bool>();
                }
                if (qa.contains("origin") && qa["origin"].is_string()) {
                    if (auto o = origin_from_string(qa["origin"].get<std::string>())) ex.origin = *o;
                }
                if (!impossible) {
                    const auto& answers = require_array(qa, "answers", qpath);
                    for (std::size_t k = 0; k < answers.size(); ++k) {
                        const std::string kpath = qpath + ".answers[" + std::to_string(k) + "]";
                        AnswerSpan span;
                        span.text = require_string(answers[k], "text", kpath);
                        const auto& start = detail::require(answers[k], "answer_start", kpath);
                        if (!start.is_number_integer() || start.get<std::int64_t>() < 0)
                            throw ParseError(kpath + ".answer_start", "expected non-negative integer");
                        span.answer_start = start.get<std::size_t>();
                        ex.answers.push_back(std::move(span));
                    }
                    if (ex.answers.empty()) throw ParseError(qpath + ".answers", "answerable question without answers");
                    for (const auto& span : ex.answers) {
                        if (!span_matches(ctx, span)) {
                            bad_spans.push_back(ex.qid);
                            break;
                        }
                    }
                }
                ex.is_answerable = !ex.answers.empty();
                ds.examples.push_back(std::move(ex));
            }
        }
    }
    if (!bad_spans.empty()) {
        std::string msg = "answer span does not match context for qid(s):";
        for (const auto& q : bad_spans) msg += " " + q;
        throw IntegrityError(msg);
    }
    return ds;
}

inline Dataset load_squad(const std::filesystem::path& path, SquadVersion version) {
    return parse_squad(io::read_json(path), version);
}

/// SQuAD v2.0 document. Only referenced docs are written, grouped into articles by title.
inline json to_squad2_json(const std::vector<ContextDoc>& docs, const std::vector<QAExample>& examples) {
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t i = 0; i < docs.size(); ++i) lookup.emplace(docs[i].doc_id, i);

    std::vector<std::string> dangling;
    std::map<std::size_t, std::vector<const QAExample*>> by_doc;
    for (const auto& ex : examples) {
        auto it = lookup.find(ex.context_ref);
        if (it == lookup.end()) {
            dangling.push_back(ex.qid);
            continue;
        }
        by_doc[it->second].push_back(&ex);
    }
    if (!dangling.empty()) {
        std::string msg = "dangling context_ref for qid(s):";
        for (const auto& q : dangling) msg += " " + q;
        throw IntegrityError(msg);
    }

    json data = json::array();
    std::unordered_map<std::string, std::size_t> article_of_title;
    for (const auto& [doc_index, qas] : by_doc) {
        const auto& doc = docs[doc_index];
        auto [it, inserted] = article_of_title.emplace(doc.title, data.size());
        if (inserted) data.push_back({{"title", doc.title}, {"paragraphs", json::array()}});
        json qa_list = json::array();
        for (const QAExample* ex : qas) {
            json answers = json::array();
            for (const auto& a : ex->answers) answers.push_back({{"text", a.text}, {"answer_start", a.answer_start}});
            qa_list.push_back({{"id", ex->qid},
                               {"question", ex->question},
                               {"answers", std::move(answers)},
                               {"is_impossible", !ex->is_answerable},
                               {"origin", to_string(ex->origin)}});
        }
        data[it->second]["paragraphs"].push_back({{"context", doc.text}, {"qas", std::move(qa_list)}});
    }
    return json{{"version", "v2.0"}, {"data", std::move(data)}};
}

inline void emit_squad2(const std::vector<ContextDoc>& docs, const std::vector<QAExample>& examples,
                        const std::filesystem::path& path) {
    io::write_file_atomic(path, to_squad2_json(docs, examples).dump() + "\n");
}

inline void emit_squad2(const Dataset& ds, const std::filesystem::path& path) {
    emit_squad2(ds.docs, ds.examples, path);
}

// ---------------------------------------------------------------------------
// HotpotQA

struct Paragraph {
    std::string title;
    std::vector<std::string> sentences;

    /// Sentences are concatenated as-is; HotpotQA sentences carry their own leading spaces.
    std::string text() const {
        std::string out;
        for (const auto& s : sentences) out += s;
        return out;
    }
};

struct HotpotRecord {
    std::string qid;
    std::string question;
    std::string answer;
    std::vector<Paragraph> paragraphs;
    std::vector<std::string> supporting_titles;  // record order, exactly 2 in well-formed data
    std::vector<std::string> distractor_titles;  // record order

    const Paragraph* paragraph(std::string_view title) const {
        for (const auto& p : paragraphs)
            if (p.title == title) return &p;
        return nullptr;
    }

    std::vector<const Paragraph*> distractors() const {
        std::vector<const Paragraph*> out;
        for (const auto& t : distractor_titles)
            if (const auto* p = paragraph(t)) out.push_back(p);
        return out;
    }
};

/// Parses the distractor-setting file: a list of {_id, question, answer, supporting_facts, context}.
inline std::vector<HotpotRecord> parse_hotpot(const json& root) {
    if (!root.is_array()) throw ParseError("$", "expected array of HotpotQA records");
    std::vector<HotpotRecord> records;
    records.reserve(root.size());
    for (std::size_t i = 0; i < root.size(); ++i) {
        const std::string path = "$[" + std::to_string(i) + "]";
        const auto& r = root[i];
        HotpotRecord rec;
        rec.qid = detail::qid_string(detail::require(r, "_id", path), path + "._id");
        rec.question = detail::require_string(r, "question", path);
        rec.answer = detail::require_string(r, "answer", path);

        const auto& ctx = detail::require_array(r, "context", path);
        for (std::size_t p = 0; p < ctx.size(); ++p) {
            const std::string ppath = path + ".context[" + std::to_string(p) + "]";
            const auto& entry = ctx[p];
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_array())
                throw ParseError(ppath, "expected [title, [sentences]]");
            Paragraph para;
            para.title = entry[0].get<std::string>();
            for (const auto& s : entry[1]) {
                if (!s.is_string()) throw ParseError(ppath + "[1]", "expected string sentence");
                para.sentences.push_back(s.get<std::string>());
            }
            rec.paragraphs.push_back(std::move(para));
        }

        std::set<std::string> supporting;
        const auto& facts = detail::require_array(r, "supporting_facts", path);
        for (std::size_t f = 0; f < facts.size(); ++f) {
            const auto& fact = facts[f];
            if (!fact.is_array() || fact.empty() || !fact[0].is_string())
                throw ParseError(path + ".supporting_facts[" + std::to_string(f) + "]", "expected [title, sent_id]");
            supporting.insert(fact[0].get<std::string>());
        }
        for (const auto& p : rec.paragraphs) {
            if (supporting.count(p.title))
                rec.supporting_titles.push_back(p.title);
            else
                rec.distractor_titles.push_back(p.title);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<HotpotRecord> load_hotpot(const std::filesystem::path& path) {
    return parse_hotpot(io::read_json(path));
}

/// Skip-with-report outcome for conversions that may legitimately drop a record.
struct SkipReport {
    std::size_t skipped = 0;
    std::vector<std::string> qids;

    void add(const std::string& qid) {
        ++skipped;
        qids.push_back(qid);
    }
};

/// Joins paragraphs in the given order with kParagraphJoin.
inline std::string join_paragraphs(const std::vector<const Paragraph*>& paras) {
    std::string out;
    for (std::size_t i = 0; i < paras.size(); ++i) {
        if (i) out += kParagraphJoin;
        out += paras[i]->text();
    }
    return out;
}

/// Answerable conversion: context is the two supporting paragraphs in record order.
/// Returns nullopt (and records the skip) when the answer is not a verbatim substring.
inline std::optional<std::pair<ContextDoc, QAExample>> convert_hotpot_answerable(const HotpotRecord& rec,
                                                                               SkipReport* report = nullptr) {
    std::vector<const Paragraph*> support;
    for (const auto& t : rec.supporting_titles)
        if (const auto* p = rec.paragraph(t)) support.push_back(p);
    const auto skip = [&]() -> std::optional<std::pair<ContextDoc, QAExample>> {
        if (report) report->add(rec.qid);
        return std::nullopt;
    };
    if (support.size() != 2) return skip();

    ContextDoc doc{rec.qid + "/support", support[0]->title + " | " + support[1]->title, join_paragraphs(support)};
    const auto pos = doc.text.find(rec.answer);
    if (rec.answer.empty() || pos == std::string::npos) return skip();

    QAExample ex;
    ex.qid = rec.qid;
    ex.question = rec.question;
    ex.context_ref = doc.doc_id;
    ex.answers.push_back({rec.answer, unicode::char_offset(doc.text, pos)});
    ex.is_answerable = true;
    return std::make_pair(std::move(doc), std::move(ex));
}

/// Unanswerable conversion from two distinct distractors drawn uniformly by seed.
inline std::optional<std::pair<ContextDoc, QAExample>> make_hotpot_unanswerable(const HotpotRecord& rec,
                                                                              std::uint64_t rng_seed,
                                                                              SkipReport* report = nullptr) {
    const auto distractors = rec.distractors();
    if (distractors.size() < 2) {
        if (report) report->add(rec.qid);
        return std::nullopt;
    }
    auto rng = make_rng(rng_seed ^ stable_hash(rec.qid));
    auto picks = sample_without_replacement(rng, distractors.size(), 2);
    if (picks[0] > picks[1]) std::swap(picks[0], picks[1]);
    std::vector<const Paragraph*> chosen{distractors[picks[0]], distractors[picks[1]]};

    ContextDoc doc{rec.qid + "/distractors", chosen[0]->title + " | " + chosen[1]->title, join_paragraphs(chosen)};
    QAExample ex;
    ex.qid = rec.qid + "_unanswerable";
    ex.question = rec.question;
    ex.context_ref = doc.doc_id;
    ex.is_answerable = false;
    return std::make_pair(std::move(doc), std::move(ex));
}

// ---------------------------------------------------------------------------
// Manifest

/// One flat manifest entry per stage.
struct StageRecord {
    std::string stage;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    json params = json::object();
};

/// Stages in pipeline order; counts along candidates -> challenging -> final never increase.
class DatasetManifest {
public:
    static constexpr std::array<std::string_view, 3> kFunnel{"candidates", "mark-challenging", "apply-filter"};

    void upsert(StageRecord rec) {
        for (auto& r : records_) {
            if (r.stage == rec.stage) {
                r = std::move(rec);
                return;
            }
        }
        records_.push_back(std::move(rec));
    }

    const StageRecord* find(std::string_view stage) const {
        for (const auto& r : records_)
            if (r.stage == stage) return &r;
        return nullptr;
    }

    const std::vector<StageRecord>& records() const { return records_; }

    /// Checks the candidate -> challenging -> final funnel over the stages present.
    bool funnel_non_increasing() const {
        std::optional<std::size_t> prev;
        for (auto name : kFunnel) {
            const auto* r = find(name);
            if (!r) continue;
            if (prev && r->count > *prev) return false;
            prev = r->count;
        }
        return true;
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& r : records_)
            arr.push_back({{"stage", r.stage}, {"count", r.count}, {"seed", r.seed}, {"params", r.params}});
        return arr;
    }

    static DatasetManifest from_json(const json& j) {
        DatasetManifest m;
        if (!j.is_array()) throw ParseError("$", "manifest must be an array of stage records");
        for (std::size_t i = 0; i < j.size(); ++i) {
            const std::string path = "$[" + std::to_string(i) + "]";
            StageRecord r;
            r.stage = detail::require_string(j[i], "stage", path);
            r.count = detail::require(j[i], "count", path).get<std::size_t>();
            r.seed = detail::require(j[i], "seed", path).get<std::uint64_t>();
            r.params = j[i].value("params", json::object());
            m.records_.push_back(std::move(r));
        }
        return m;
    }

private:
    std::vector<StageRecord> records_;
};

}  // namespace agent::corpus
