#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/error.hpp"
#include "agent/io.hpp"
#include "agent/rng.hpp"

namespace agent::ensemble {

using json = nlohmann::json;

/// One model's output for one question. An empty prediction means the model abstains.
struct ModelVerdict {
    std::string model_id;
    std::string qid;
    std::string predicted_text;
    double confidence = 0.0;

    bool answers() const noexcept { return !predicted_text.empty(); }
};

/// Vote/confidence aggregate over the ensemble for one question.
struct EnsembleSummary {
    std::string qid;
    int n_a = 0;       // models that answered
    int n_u = 0;       // models that abstained
    double c_a = 0.0;  // total confidence of answering models
    double c_u = 0.0;  // total confidence of abstaining models

    int difficulty() const noexcept { return n_a; }
    int n_models() const noexcept { return n_a + n_u; }
};

struct AdversarialSplit {
    std::vector<std::string> train_answerable;
    std::vector<std::string> train_unanswerable;  // sampled candidate ids, in input order
    std::vector<std::string> held_out_candidates; // the rest, in input order
};

/// floor(ratio * n): 87,599 answerable at ratio 0.5 gives 43,799.
inline std::size_t required_unanswerable(std::size_t n_answerable, double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<long double>(ratio) * n_answerable));
}

/// Draws the unanswerable half of the adversarial fine-tuning set uniformly
/// without replacement; everything not drawn is held out for ensemble scoring.
inline AdversarialSplit sample_adversarial_training(const std::vector<std::string>& answerable,
                                                    const std::vector<std::string>& candidates, double ratio,
                                                    std::uint64_t rng_seed) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("ratio must be in (0, 1]");
    const std::size_t need = required_unanswerable(answerable.size(), ratio);
    if (need > candidates.size())
        throw ValidationError("insufficient candidates for adversarial training: required " + std::to_string(need) +
                              ", available " + std::to_string(candidates.size()));

    auto rng = make_rng(rng_seed);
    const auto picks = sample_without_replacement(rng, candidates.size(), need);
    std::vector<char> taken(candidates.size(), 0);
    for (auto i : picks) taken[i] = 1;

    AdversarialSplit split;
    split.train_answerable = answerable;
    split.train_unanswerable.reserve(need);
    split.held_out_candidates.reserve(candidates.size() - need);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        (taken[i] ? split.train_unanswerable : split.held_out_candidates).push_back(candidates[i]);
    return split;
}

/// Parsed prediction file: {"model_id": str, "predictions": {qid: {"text": str, "confidence": float}}}.
struct PredictionFile {
    std::string model_id;
    std::map<std::string, ModelVerdict> predictions;
};

inline PredictionFile parse_prediction_file(const json& j, const std::string& source) {
    if (!j.is_object()) throw ParseError(source + ":$", "expected object");
    if (!j.contains("model_id") || !j["model_id"].is_string())
        throw ParseError(source + ":$.model_id", "missing or non-string model_id");
    if (!j.contains("predictions") || !j["predictions"].is_object())
        throw ParseError(source + ":$.predictions", "missing or non-object predictions");

    PredictionFile f;
    f.model_id = j["model_id"].get<std::string>();
    for (const auto& [qid, p] : j["predictions"].items()) {
        const std::string path = source + ":$.predictions." + qid;
        if (!p.is_object() || !p.contains("text") || !p["text"].is_string())
            throw ParseError(path, "expected {text, confidence}");
        if (!p.contains("confidence") || !p["confidence"].is_number())
            throw ParseError(path + ".confidence", "expected number");
        const double c = p["confidence"].get<double>();
        if (!(c >= 0.0 && c <= 1.0))
            throw ValidationError("confidence " + std::to_string(c) + " outside [0,1] for model " + f.model_id +
                                  ", qid " + qid);
        f.predictions.emplace(qid, ModelVerdict{f.model_id, qid, p["text"].get<std::string>(), c});
    }
    return f;
}

/// Merges per-model files into qid -> verdicts (file order). Every model must cover
/// every qid in `expected` (or, when empty, the union of all files).
inline std::map<std::string, std::vector<ModelVerdict>> merge_predictions(const std::vector<PredictionFile>& files,
                                                                          const std::vector<std::string>& expected = {}) {
    if (files.empty()) throw ValidationError("no prediction files supplied");
    std::set<std::string> qids(expected.begin(), expected.end());
    if (expected.empty())
        for (const auto& f : files)
            for (const auto& [qid, v] : f.predictions) qids.insert(qid);

    std::vector<std::string> missing;
    for (const auto& f : files)
        for (const auto& qid : qids)
            if (!f.predictions.count(qid)) missing.push_back("(" + f.model_id + ", " + qid + ")");
    if (!missing.empty()) {
        std::string msg = "prediction coverage error; missing (model_id, qid):";
        const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
        if (missing.size() > shown) msg += " ... (" + std::to_string(missing.size()) + " total)";
        throw IntegrityError(msg);
    }

    std::map<std::string, std::vector<ModelVerdict>> out;
    for (const auto& qid : qids) {
        auto& list = out[qid];
        list.reserve(files.size());
        for (const auto& f : files) list.push_back(f.predictions.at(qid));
    }
    return out;
}

inline std::map<std::string, std::vector<ModelVerdict>> load_predictions(
    const std::vector<std::filesystem::path>& paths, const std::vector<std::string>& expected = {}) {
    std::vector<PredictionFile> files;
    files.reserve(paths.size());
    for (const auto& p : paths) files.push_back(parse_prediction_file(io::read_json(p), p.string()));
    return merge_predictions(files, expected);
}

inline EnsembleSummary summarize(const std::vector<ModelVerdict>& verdicts) {
    if (verdicts.empty()) throw ValidationError("summarize needs at least one verdict");
    EnsembleSummary s;
    s.qid = verdicts.front().qid;
    for (const auto& v : verdicts) {
        if (v.qid != s.qid) throw ValidationError("summarize got mixed qids: " + s.qid + " and " + v.qid);
        if (v.answers()) {
            ++s.n_a;
            s.c_a += v.confidence;
        } else {
            ++s.n_u;
            s.c_u += v.confidence;
        }
    }
    return s;
}

/// Candidates at least `min_votes` models tried to answer, in input order.
inline std::vector<std::string> mark_challenging(const std::vector<EnsembleSummary>& summaries, int min_votes = 2) {
    std::vector<std::string> out;
    for (const auto& s : summaries)
        if (s.n_a >= min_votes) out.push_back(s.qid);
    return out;
}

inline json to_json(const EnsembleSummary& s) {
    return {{"qid", s.qid}, {"n_a", s.n_a}, {"n_u", s.n_u}, {"c_a", s.c_a}, {"c_u", s.c_u}};
}

inline EnsembleSummary summary_from_json(const json& j) {
    EnsembleSummary s;
    s.qid = j.at("qid").get<std::string>();
    s.n_a = j.at("n_a").get<int>();
    s.n_u = j.at("n_u").get<int>();
    s.c_a = j.at("c_a").get<double>();
    s.c_u = j.at("c_u").get<double>();
    return s;
}

}  // namespace agent::ensemble
