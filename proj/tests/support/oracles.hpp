#pragma once

// Brute-force reference implementations used only by tests. Each one follows a
// different computational route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "agent/corpus.hpp"
#include "agent/ensemble.hpp"
#include "agent/text.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Dense TF-IDF: one full-vocabulary vector per document.

struct DenseHit {
    std::string doc_id;
    double score;
};

class DenseTfidf {
public:
    explicit DenseTfidf(const std::vector<agent::corpus::ContextDoc>& docs) : docs_(docs) {
        std::sort(docs_.begin(), docs_.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
        std::vector<std::vector<std::string>> terms;
        for (const auto& d : docs_) {
            terms.push_back(agent::text::bigrams(d.text));
            vocab_.insert(terms.back().begin(), terms.back().end());
        }
        const double n = static_cast<double>(docs_.size());
        for (const auto& t : vocab_) {
            int df = 0;
            for (const auto& doc_terms : terms)
                if (std::find(doc_terms.begin(), doc_terms.end(), t) != doc_terms.end()) ++df;
            idf_[t] = std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
        }
        for (const auto& doc_terms : terms) vectors_.push_back(weights(doc_terms));
        for (const auto& v : vectors_) {
            double sq = 0.0;
            for (double w : v) sq += w * w;
            norms_.push_back(std::sqrt(sq));
        }
    }

    double idf(const std::string& t) const { return idf_.at(t); }

    double score(const std::string& query, std::size_t doc) const {
        return score(weights(agent::text::bigrams(query)), doc);
    }

    double score(const std::vector<double>& q, std::size_t doc) const {
        double dot = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * vectors_[doc][i];
        return norms_[doc] > 0.0 ? dot / norms_[doc] : 0.0;
    }

    /// Scores all docs, drops those with `excluded_text`, sorts by (score desc, doc_id asc).
    std::vector<DenseHit> rank(const std::string& query, const std::string& excluded_text, std::size_t k) const {
        const auto q = weights(agent::text::bigrams(query));
        std::vector<DenseHit> hits;
        for (std::size_t d = 0; d < docs_.size(); ++d) {
            if (docs_[d].text == excluded_text) continue;
            hits.push_back({docs_[d].doc_id, score(q, d)});
        }
        std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
        if (hits.size() > k) hits.resize(k);
        return hits;
    }

private:
    // Vocabulary order (std::set, lexicographic); terms outside the vocabulary contribute nothing.
    std::vector<double> weights(const std::vector<std::string>& terms) const {
        std::vector<double> v(vocab_.size(), 0.0);
        std::size_t i = 0;
        for (const auto& t : vocab_) {
            const auto tf = static_cast<double>(std::count(terms.begin(), terms.end(), t));
            v[i++] = tf * idf_.at(t);
        }
        return v;
    }

    std::vector<agent::corpus::ContextDoc> docs_;
    std::set<std::string> vocab_;
    std::map<std::string, double> idf_;
    std::vector<std::vector<double>> vectors_;
    std::vector<double> norms_;
};

// ---------------------------------------------------------------------------
// Reference SQuAD scorer for ASCII inputs.

inline bool ascii_punct(char c) {
    // ASCII members of Unicode general category P*.
    static const std::string p = "!\"#%&'()*,-./:;?@[\\]_{}";
    return p.find(c) != std::string::npos;
}

inline std::vector<std::string> ref_tokens(const std::string& s) {
    std::string cleaned;
    for (char c : s) {
        if (ascii_punct(c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") out.push_back(cur);
        cur.clear();
    };
    for (char c : cleaned) {
        if (c == ' ' || c == '\t' || c == '\n') flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

inline int ref_em(const std::string& pred, const std::vector<std::string>& golds) {
    const auto p = ref_tokens(pred);
    if (golds.empty()) return p.empty();
    for (const auto& g : golds)
        if (ref_tokens(g) == p) return 1;
    return 0;
}

inline double ref_f1(const std::string& pred, const std::vector<std::string>& golds) {
    auto p = ref_tokens(pred);
    if (golds.empty()) return p.empty() ? 1.0 : 0.0;
    std::sort(p.begin(), p.end());
    double best = 0.0;
    for (const auto& gold : golds) {
        auto g = ref_tokens(gold);
        if (p.empty() || g.empty()) {
            best = std::max(best, (p.empty() && g.empty()) ? 1.0 : 0.0);
            continue;
        }
        std::sort(g.begin(), g.end());
        std::vector<std::string> common;
        std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
        if (common.empty()) continue;
        const double prec = static_cast<double>(common.size()) / p.size();
        const double rec = static_cast<double>(common.size()) / g.size();
        best = std::max(best, 2 * prec * rec / (prec + rec));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Filter formula and exhaustive grid search, evaluated directly per point.

inline double filter_value(const agent::ensemble::EnsembleSummary& s, double a, double b) {
    const double answer_term = s.c_a * std::pow(a, static_cast<double>(s.n_a));
    const double abstain_term = s.c_u * std::pow(b, static_cast<double>(s.n_u));
    return answer_term - abstain_term;
}

struct GridOptimum {
    double alpha;
    double beta;
    double threshold;
    std::size_t kept_unanswerable;
};

/// Grid values are i / steps_per_unit for i = 1 .. hi * steps_per_unit.
inline GridOptimum exhaustive_grid(const std::vector<std::pair<agent::ensemble::EnsembleSummary, bool>>& items,
                                   int steps_per_unit = 100, int hi = 2) {
    GridOptimum best{0, 0, 0, 0};
    bool have = false;
    const int n = steps_per_unit * hi;
    for (int i = 1; i <= n; ++i) {
        const double a = static_cast<double>(i) / steps_per_unit;
        for (int j = 1; j <= n; ++j) {
            const double b = static_cast<double>(j) / steps_per_unit;
            double thr = INFINITY;
            for (const auto& [s, answerable] : items)
                if (answerable) thr = std::min(thr, filter_value(s, a, b));
            std::size_t kept = 0;
            for (const auto& [s, answerable] : items)
                if (!answerable && filter_value(s, a, b) < thr) ++kept;
            if (!have || kept > best.kept_unanswerable) {
                best = {a, b, thr, kept};
                have = true;
            }
        }
    }
    return best;
}

}  // namespace oracle
