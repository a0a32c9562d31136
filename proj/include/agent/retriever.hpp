#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/corpus.hpp"
#include "agent/error.hpp"
#include "agent/io.hpp"
#include "agent/text.hpp"

namespace agent::retriever {

using corpus::ContextDoc;
using corpus::QAExample;
using json = nlohmann::json;

struct Posting {
    std::uint32_t doc;  // ordinal into TfidfIndex::doc_ids
    std::uint32_t tf;
};

/// Okapi-style idf, clamped at zero.
inline double idf(std::size_t n_docs, std::size_t df) {
    const double n = static_cast<double>(n_docs);
    const double d = static_cast<double>(df);
    return std::max(0.0, std::log((n - d + 0.5) / (d + 0.5)));
}

/// Term counts in lexicographic term order.
inline std::map<std::string, std::uint32_t> term_counts(std::string_view text) {
    std::map<std::string, std::uint32_t> counts;
    for (auto& t : text::bigrams(text)) ++counts[std::move(t)];
    return counts;
}

/// Bigram TF-IDF inverted index. Documents are held in doc_id order so results do
/// not depend on the order the corpus was supplied in.
class TfidfIndex {
public:
    struct Term {
        double idf = 0.0;
        std::vector<Posting> postings;  // ascending doc ordinal

        std::size_t df() const noexcept { return postings.size(); }
    };

    std::size_t size() const noexcept { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<double>& doc_norms() const noexcept { return norms_; }
    const std::unordered_map<std::string, Term>& terms() const noexcept { return terms_; }

    const Term* term(const std::string& t) const {
        auto it = terms_.find(t);
        return it == terms_.end() ? nullptr : &it->second;
    }

    std::optional<std::uint32_t> ordinal(std::string_view doc_id) const {
        auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
        if (it == doc_ids_.end() || *it != doc_id) return std::nullopt;
        return static_cast<std::uint32_t>(it - doc_ids_.begin());
    }

    /// Ordinals of documents sharing the exact text of `ordinal` (including itself).
    const std::vector<std::uint32_t>& same_text(std::uint32_t ordinal) const {
        return text_groups_[text_group_of_[ordinal]];
    }

    friend TfidfIndex build_index(const std::vector<ContextDoc>& docs);
    friend void save_index(const TfidfIndex& index, const std::filesystem::path& path);
    friend TfidfIndex load_index(const std::filesystem::path& path);

private:
    void finalize(const std::vector<std::map<std::string, std::uint32_t>>& per_doc_counts);

    std::vector<std::string> doc_ids_;
    std::vector<double> norms_;
    std::unordered_map<std::string, Term> terms_;
    std::vector<std::uint32_t> text_group_of_;
    std::vector<std::vector<std::uint32_t>> text_groups_;
};

inline void TfidfIndex::finalize(const std::vector<std::map<std::string, std::uint32_t>>& per_doc_counts) {
    const std::size_t n = doc_ids_.size();
    for (auto& [name, term] : terms_) term.idf = idf(n, term.df());

    // Norms sum in lexicographic term order so dense recomputation agrees bit-for-bit.
    norms_.assign(n, 0.0);
    for (std::size_t d = 0; d < n; ++d) {
        double sq = 0.0;
        for (const auto& [name, tf] : per_doc_counts[d]) {
            const double w = tf * terms_.at(name).idf;
            sq += w * w;
        }
        norms_[d] = std::sqrt(sq);
    }
}

/// Builds the index; throws ValidationError on an empty corpus or duplicate doc_ids.
inline TfidfIndex build_index(const std::vector<ContextDoc>& docs) {
    if (docs.empty()) throw ValidationError("cannot build a TF-IDF index over an empty corpus");
    std::vector<const ContextDoc*> sorted;
    sorted.reserve(docs.size());
    for (const auto& d : docs) sorted.push_back(&d);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->doc_id < b->doc_id; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->doc_id == sorted[i - 1]->doc_id)
            throw ValidationError("duplicate doc_id in corpus: " + sorted[i]->doc_id);
    if (sorted.size() > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("corpus too large");

    TfidfIndex index;
    std::vector<std::map<std::string, std::uint32_t>> per_doc(sorted.size());
    std::unordered_map<std::string, std::uint32_t> group_by_text;
    for (std::uint32_t d = 0; d < sorted.size(); ++d) {
        index.doc_ids_.push_back(sorted[d]->doc_id);
        per_doc[d] = term_counts(sorted[d]->text);
        for (const auto& [name, tf] : per_doc[d]) index.terms_[name].postings.push_back({d, tf});

        auto [it, inserted] = group_by_text.emplace(sorted[d]->text, static_cast<std::uint32_t>(index.text_groups_.size()));
        if (inserted) index.text_groups_.emplace_back();
        index.text_groups_[it->second].push_back(d);
        index.text_group_of_.push_back(it->second);
    }
    index.finalize(per_doc);
    return index;
}

/// Unnormalized query-side weights: tf(t, query) * idf(t), in lexicographic term order.
inline std::vector<std::pair<const TfidfIndex::Term*, double>> query_weights(const TfidfIndex& index,
                                                                              std::string_view query) {
    std::vector<std::pair<const TfidfIndex::Term*, double>> out;
    for (const auto& [name, tf] : term_counts(query)) {
        if (const auto* t = index.term(name)) out.emplace_back(t, tf * t->idf);
    }
    return out;
}

/// Scores every document against `query`; entry i belongs to doc ordinal i.
inline std::vector<double> score_all(const TfidfIndex& index, std::string_view query) {
    std::vector<double> acc(index.size(), 0.0);
    for (const auto& [term, qw] : query_weights(index, query)) {
        if (qw == 0.0) continue;
        for (const auto& p : term->postings) acc[p.doc] += qw * (p.tf * term->idf);
    }
    const auto& norms = index.doc_norms();
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] = norms[d] > 0.0 ? acc[d] / norms[d] : 0.0;
    return acc;
}

/// Relevance of one document; 0 when nothing overlaps.
inline double score(const TfidfIndex& index, std::string_view query, std::string_view doc_id) {
    const auto ord = index.ordinal(doc_id);
    if (!ord) throw ValidationError("unknown doc_id " + std::string(doc_id));
    double acc = 0.0;
    for (const auto& [term, qw] : query_weights(index, query)) {
        if (qw == 0.0) continue;
        auto it = std::lower_bound(term->postings.begin(), term->postings.end(), *ord,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it != term->postings.end() && it->doc == *ord) acc += qw * (it->tf * term->idf);
    }
    const double norm = index.doc_norms()[*ord];
    return norm > 0.0 ? acc / norm : 0.0;
}

struct RetrieverConfig {
    std::size_t k = 10;

    void validate() const {
        if (k < 1) throw ValidationError("k must be >= 1");
    }
};

enum class Provenance { TfidfTopK, DistractorPair };

inline const char* to_string(Provenance p) { return p == Provenance::TfidfTopK ? "tfidf_top_k" : "distractor_pair"; }

struct CandidatePair {
    std::string qid;
    std::string new_doc_id;
    std::optional<double> score;  // unset for distractor pairs
    std::size_t rank = 0;         // 1-based
    Provenance provenance = Provenance::TfidfTopK;

    /// Question id the candidate carries into downstream files.
    std::string candidate_id() const { return qid + "_agent" + std::to_string(rank); }
};

/// The k best documents for the question excluding its own context and any
/// document with identical text. Ties break by doc_id ascending.
inline std::vector<CandidatePair> top_k_excluding(const TfidfIndex& index, const QAExample& question,
                                                  const RetrieverConfig& cfg) {
    cfg.validate();
    std::vector<char> excluded(index.size(), 0);
    if (const auto own = index.ordinal(question.context_ref)) {
        for (auto d : index.same_text(*own)) excluded[d] = 1;
    }

    const auto scores = score_all(index, question.question);
    std::vector<std::uint32_t> order;
    order.reserve(index.size());
    for (std::uint32_t d = 0; d < index.size(); ++d)
        if (!excluded[d]) order.push_back(d);

    const std::size_t take = std::min(cfg.k, order.size());
    // Ordinals follow doc_id order, so comparing ordinals breaks ties by doc_id.
    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);

    std::vector<CandidatePair> out;
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const auto d = order[r];
        out.push_back({question.qid, index.doc_ids()[d], scores[d], r + 1, Provenance::TfidfTopK});
    }
    return out;
}

/// Candidate generation over a whole answerable dataset; output ordered by (question order, rank).
inline std::vector<CandidatePair> generate_candidates_squad(const std::vector<QAExample>& questions,
                                                            const RetrieverConfig& cfg, const TfidfIndex& index) {
    cfg.validate();
    std::vector<CandidatePair> out;
    out.reserve(questions.size() * std::min(cfg.k, index.size()));
    for (const auto& q : questions) {
        if (!q.is_answerable) throw ValidationError("candidate generation expects answerable questions; got " + q.qid);
        auto pairs = top_k_excluding(index, q, cfg);
        std::move(pairs.begin(), pairs.end(), std::back_inserter(out));
    }
    return out;
}

/// Candidates plus the concatenated contexts they point at.
struct HotpotCandidates {
    std::vector<CandidatePair> candidates;
    std::vector<ContextDoc> docs;
};

/// One candidate per unordered distractor pair, enumerated (i, j) with i < j in record order.
inline HotpotCandidates generate_candidates_hotpot(const std::vector<corpus::HotpotRecord>& records) {
    HotpotCandidates out;
    for (const auto& rec : records) {
        const auto distractors = rec.distractors();
        std::size_t rank = 0;
        for (std::size_t i = 0; i < distractors.size(); ++i) {
            for (std::size_t j = i + 1; j < distractors.size(); ++j) {
                ++rank;
                ContextDoc doc{rec.qid + "/pair-" + std::to_string(i) + "-" + std::to_string(j),
                               distractors[i]->title + " | " + distractors[j]->title,
                               corpus::join_paragraphs({distractors[i], distractors[j]})};
                out.candidates.push_back({rec.qid, doc.doc_id, std::nullopt, rank, Provenance::DistractorPair});
                out.docs.push_back(std::move(doc));
            }
        }
    }
    return out;
}

inline json to_json(const CandidatePair& c) {
    return {{"qid", c.qid},
            {"doc_id", c.new_doc_id},
            {"score", c.score ? json(*c.score) : json(nullptr)},
            {"rank", c.rank},
            {"provenance", to_string(c.provenance)}};
}

inline CandidatePair candidate_from_json(const json& j) {
    CandidatePair c;
    c.qid = j.at("qid").get<std::string>();
    c.new_doc_id = j.at("doc_id").get<std::string>();
    if (j.contains("score") && !j["score"].is_null()) c.score = j["score"].get<double>();
    c.rank = j.at("rank").get<std::size_t>();
    const auto prov = j.at("provenance").get<std::string>();
    if (prov == "tfidf_top_k")
        c.provenance = Provenance::TfidfTopK;
    else if (prov == "distractor_pair")
        c.provenance = Provenance::DistractorPair;
    else
        throw ParseError("$.provenance", "unknown provenance " + prov);
    return c;
}

inline void write_candidates(const std::filesystem::path& path, const std::vector<CandidatePair>& cands) {
    std::vector<json> rows;
    rows.reserve(cands.size());
    for (const auto& c : cands) rows.push_back(to_json(c));
    io::write_jsonl(path, rows);
}

inline std::vector<CandidatePair> read_candidates(const std::filesystem::path& path) {
    std::vector<CandidatePair> out;
    for (const auto& row : io::read_jsonl(path)) {
        try {
            out.push_back(candidate_from_json(row));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk cache: magic, version, then little-endian length-prefixed records.

inline constexpr char kIndexMagic[8] = {'A', 'G', 'T', 'F', 'I', 'D', 'X', '\0'};
inline constexpr std::uint32_t kIndexVersion = 1;

namespace detail {

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IntegrityError("truncated index cache");
    return v;
}

inline std::string get_string(std::ifstream& in) {
    const auto n = get<std::uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw IntegrityError("truncated index cache");
    return s;
}

}  // namespace detail

inline void save_index(const TfidfIndex& index, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IntegrityError("cannot write " + tmp.string());
        out.write(kIndexMagic, sizeof(kIndexMagic));
        detail::put<std::uint32_t>(out, kIndexVersion);
        detail::put<std::uint64_t>(out, index.size());
        for (std::size_t d = 0; d < index.size(); ++d) {
            detail::put_string(out, index.doc_ids_[d]);
            detail::put<double>(out, index.norms_[d]);
            detail::put<std::uint32_t>(out, index.text_group_of_[d]);
        }
        // Terms sorted so the file is byte-stable.
        std::vector<const std::pair<const std::string, TfidfIndex::Term>*> sorted;
        for (const auto& kv : index.terms_) sorted.push_back(&kv);
        std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
        detail::put<std::uint64_t>(out, sorted.size());
        for (const auto* kv : sorted) {
            detail::put_string(out, kv->first);
            detail::put<double>(out, kv->second.idf);
            detail::put<std::uint64_t>(out, kv->second.postings.size());
            for (const auto& p : kv->second.postings) {
                detail::put<std::uint32_t>(out, p.doc);
                detail::put<std::uint32_t>(out, p.tf);
            }
        }
        if (!out) throw IntegrityError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline TfidfIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot open index cache " + path.string());
    char magic[sizeof(kIndexMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0)
        throw IntegrityError(path.string() + " is not a TF-IDF index cache");
    const auto version = detail::get<std::uint32_t>(in);
    if (version != kIndexVersion)
        throw IntegrityError("index cache version " + std::to_string(version) + " unsupported (expected " +
                             std::to_string(kIndexVersion) + "); rebuild the index");

    TfidfIndex index;
    const auto n = detail::get<std::uint64_t>(in);
    std::uint32_t groups = 0;
    for (std::uint64_t d = 0; d < n; ++d) {
        index.doc_ids_.push_back(detail::get_string(in));
        index.norms_.push_back(detail::get<double>(in));
        const auto g = detail::get<std::uint32_t>(in);
        index.text_group_of_.push_back(g);
        groups = std::max(groups, g + 1);
    }
    index.text_groups_.assign(groups, {});
    for (std::uint32_t d = 0; d < n; ++d) index.text_groups_[index.text_group_of_[d]].push_back(d);

    const auto n_terms = detail::get<std::uint64_t>(in);
    index.terms_.reserve(n_terms);
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        auto name = detail::get_string(in);
        TfidfIndex::Term term;
        term.idf = detail::get<double>(in);
        const auto n_post = detail::get<std::uint64_t>(in);
        term.postings.resize(n_post);
        for (auto& p : term.postings) {
            p.doc = detail::get<std::uint32_t>(in);
            p.tf = detail::get<std::uint32_t>(in);
            if (p.doc >= n) throw IntegrityError("index cache posting out of range");
        }
        index.terms_.emplace(std::move(name), std::move(term));
    }
    return index;
}

}  // namespace agent::retriever
