#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/corpus.hpp"
#include "agent/error.hpp"
#include "agent/io.hpp"
#include "agent/text.hpp"

namespace agent::evaluator {

using json = nlohmann::json;

namespace detail {

inline std::vector<std::string> split_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto j = s.find(' ', i);
        const auto end = j == std::string::npos ? s.size() : j;
        if (end > i) out.push_back(s.substr(i, end - i));
        i = end + 1;
    }
    return out;
}

inline double f1_single(const std::string& pred, const std::string& gold) {
    const auto p = split_spaces(text::normalize_answer(pred));
    const auto g = split_spaces(text::normalize_answer(gold));
    if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;

    std::unordered_map<std::string, int> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    int overlap = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = double(overlap) / double(p.size());
    const double recall = double(overlap) / double(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

/// 1 when the normalized prediction equals any normalized gold. With no golds
/// the question is unanswerable and only an empty prediction matches.
inline int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
    const auto p = text::normalize_answer(pred);
    if (golds.empty()) return p.empty() ? 1 : 0;
    for (const auto& g : golds)
        if (text::normalize_answer(g) == p) return 1;
    return 0;
}

/// Token-multiset F1, maximized over golds.
inline double f1(const std::string& pred, const std::vector<std::string>& golds) {
    if (golds.empty()) return text::normalize_answer(pred).empty() ? 1.0 : 0.0;
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, detail::f1_single(pred, g));
    return best;
}

struct QuestionScore {
    std::string qid;
    bool answerable = true;
    int em = 0;
    double f1 = 0.0;
};

struct SplitScore {
    double em = 0.0;  // percentages
    double f1 = 0.0;
    std::size_t n = 0;
};

/// Per-question scores plus "all", "answerable" and "unanswerable" splits
/// (a split is omitted when it has no questions).
struct EvalReport {
    std::vector<QuestionScore> questions;
    std::map<std::string, SplitScore> splits;
};

inline EvalReport evaluate_dataset(const std::vector<corpus::QAExample>& examples,
                                   const std::unordered_map<std::string, std::string>& predictions) {
    std::vector<std::string> missing;
    for (const auto& ex : examples)
        if (!predictions.count(ex.qid)) missing.push_back(ex.qid);
    if (!missing.empty()) {
        std::string msg = "predictions missing for qid(s):";
        const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
        if (missing.size() > shown) msg += " ... (" + std::to_string(missing.size()) + " total)";
        throw IntegrityError(msg);
    }

    EvalReport rep;
    std::map<std::string, std::pair<double, double>> sums;
    for (const auto& ex : examples) {
        std::vector<std::string> golds;
        for (const auto& a : ex.answers) golds.push_back(a.text);
        const auto& pred = predictions.at(ex.qid);
        QuestionScore q{ex.qid, ex.is_answerable, exact_match(pred, golds), f1(pred, golds)};
        for (const char* split : {"all", ex.is_answerable ? "answerable" : "unanswerable"}) {
            auto& s = rep.splits[split];
            ++s.n;
            sums[split].first += q.em;
            sums[split].second += q.f1;
        }
        rep.questions.push_back(std::move(q));
    }
    for (auto& [name, s] : rep.splits) {
        s.em = 100.0 * sums[name].first / double(s.n);
        s.f1 = 100.0 * sums[name].second / double(s.n);
    }
    return rep;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population (divide by n)
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    if (xs.empty()) throw ValidationError("mean/std of an empty list");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / double(xs.size());
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / double(xs.size()))};
}

/// Mean and population std of F1 across models, per split.
inline std::map<std::string, MeanStd> aggregate_models(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw ValidationError("aggregate_models needs at least one report");
    std::map<std::string, std::vector<double>> f1s;
    for (const auto& r : reports) {
        if (r.splits.size() != reports.front().splits.size())
            throw ValidationError("split mismatch between evaluation reports");
        for (const auto& [name, s] : r.splits) {
            if (!reports.front().splits.count(name)) throw ValidationError("split mismatch: unexpected split " + name);
            f1s[name].push_back(s.f1);
        }
    }
    std::map<std::string, MeanStd> out;
    for (const auto& [name, xs] : f1s) out[name] = mean_std(xs);
    return out;
}

/// Reads either {qid: text} or the ensemble format {"model_id", "predictions": {qid: {text, confidence}}}.
inline std::unordered_map<std::string, std::string> parse_predictions(const json& j, const std::string& source) {
    if (!j.is_object()) throw ParseError(source + ":$", "expected object");
    std::unordered_map<std::string, std::string> out;
    const bool wrapped = j.contains("predictions") && j["predictions"].is_object();
    const json& body = wrapped ? j["predictions"] : j;
    for (const auto& [qid, v] : body.items()) {
        if (v.is_string())
            out.emplace(qid, v.get<std::string>());
        else if (v.is_object() && v.contains("text") && v["text"].is_string())
            out.emplace(qid, v["text"].get<std::string>());
        else
            throw ParseError(source + ":$." + qid, "expected answer string");
    }
    return out;
}

inline std::unordered_map<std::string, std::string> load_predictions(const std::filesystem::path& path) {
    return parse_predictions(io::read_json(path), path.string());
}

inline json to_json(const EvalReport& r) {
    json splits = json::object();
    for (const auto& [name, s] : r.splits) splits[name] = {{"em", s.em}, {"f1", s.f1}, {"n", s.n}};
    return splits;
}

}  // namespace agent::evaluator
