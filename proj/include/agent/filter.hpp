#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/ensemble.hpp"
#include "agent/error.hpp"

namespace agent::filter {

using ensemble::EnsembleSummary;
using json = nlohmann::json;

struct FilterParams {
    double alpha = 1.0;
    double beta = 1.0;
    std::optional<double> threshold;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 2.0)) throw ValidationError("alpha must be in (0, 2]");
        if (!(beta > 0.0 && beta <= 2.0)) throw ValidationError("beta must be in (0, 2]");
    }
};

/// Filter score: c_a * alpha^n_a - c_u * beta^n_u.
inline double value(const EnsembleSummary& s, double alpha, double beta) {
    return s.c_a * std::pow(alpha, s.n_a) - s.c_u * std::pow(beta, s.n_u);
}

inline double value(const EnsembleSummary& s, const FilterParams& p) { return value(s, p.alpha, p.beta); }

/// Filter tuning item: an ensemble summary with its expert verdict.
struct AnnotatedItem {
    EnsembleSummary summary;
    bool answerable = false;
};

/// Lowest score attained by an answerable-labelled item.
inline double select_threshold(const std::vector<AnnotatedItem>& annotated, double alpha, double beta) {
    std::optional<double> lo;
    for (const auto& item : annotated) {
        if (!item.answerable) continue;
        const double v = value(item.summary, alpha, beta);
        if (!lo || v < *lo) lo = v;
    }
    if (!lo) throw ValidationError("threshold undefined: no answerable item among the annotations");
    return *lo;
}

inline double select_threshold(const std::vector<AnnotatedItem>& annotated, const FilterParams& p) {
    return select_threshold(annotated, p.alpha, p.beta);
}

/// Keeps strictly-below-threshold candidates. A score equal to the threshold is
/// discarded because the threshold itself belongs to an answerable item.
inline bool keeps(double v, double threshold) { return v < threshold; }

struct FilterOutcome {
    std::vector<std::string> kept;
    std::vector<std::string> discarded;
    std::vector<double> values;  // parallel to the input summaries
};

inline FilterOutcome apply_filter(const std::vector<EnsembleSummary>& summaries, const FilterParams& p) {
    if (!p.threshold) throw ValidationError("apply_filter requires a threshold; run tuning first");
    FilterOutcome out;
    out.values.reserve(summaries.size());
    for (const auto& s : summaries) {
        const double v = value(s, p);
        out.values.push_back(v);
        (keeps(v, *p.threshold) ? out.kept : out.discarded).push_back(s.qid);
    }
    return out;
}

struct GridPoint {
    double alpha;
    double beta;
    double recall;
};

struct TuneReport {
    FilterParams params;
    double recall = 0.0;
    std::size_t tuning_size = 0;
    std::size_t n_unanswerable = 0;
    double grid_step = 0.01;
    std::vector<GridPoint> trace;  // filled only when requested
};

struct GridSpec {
    double step = 0.01;
    double range_hi = 2.0;

    /// Number of grid points per axis; the step must divide the range.
    std::size_t points() const {
        if (!(step > 0.0) || !(range_hi > 0.0) || range_hi > 2.0)
            throw ValidationError("grid requires 0 < step and 0 < range_hi <= 2");
        const double n = range_hi / step;
        const double rounded = std::round(n);
        if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * rounded)
            throw ValidationError("grid step must evenly divide the search range");
        return static_cast<std::size_t>(rounded);
    }

    /// i-th grid value for i in 1..points(), computed as one division so 0.64 is the nearest double to 0.64.
    double at(std::size_t i) const { return (range_hi * static_cast<double>(i)) / static_cast<double>(points()); }
};

/// Grid search over (alpha, beta) in (0, range_hi]^2 maximizing the fraction of
/// unanswerable items kept under the per-point threshold. Ties keep the
/// lexicographically smallest (alpha, beta).
inline TuneReport tune(const std::vector<AnnotatedItem>& annotated, GridSpec grid = {}, bool keep_trace = false) {
    const std::size_t n = grid.points();
    std::size_t n_unans = 0;
    std::size_t n_ans = 0;
    int max_exp = 0;
    for (const auto& item : annotated) {
        (item.answerable ? n_ans : n_unans) += 1;
        max_exp = std::max({max_exp, item.summary.n_a, item.summary.n_u});
    }
    if (n_ans == 0) throw ValidationError("threshold undefined: no answerable item among the annotations");
    if (n_unans == 0) throw ValidationError("tuning needs at least one unanswerable-labelled item");

    // powers[i][e] = grid(i)^e
    std::vector<std::vector<double>> powers(n + 1, std::vector<double>(static_cast<std::size_t>(max_exp) + 1));
    for (std::size_t i = 1; i <= n; ++i)
        for (int e = 0; e <= max_exp; ++e) powers[i][static_cast<std::size_t>(e)] = std::pow(grid.at(i), e);

    std::vector<double> values(annotated.size());
    TuneReport report;
    report.tuning_size = annotated.size();
    report.n_unanswerable = n_unans;
    report.grid_step = grid.step;
    std::optional<std::size_t> best_kept;
    if (keep_trace) report.trace.reserve(n * n);

    for (std::size_t ai = 1; ai <= n; ++ai) {
        const auto& pa = powers[ai];
        for (std::size_t bi = 1; bi <= n; ++bi) {
            const auto& pb = powers[bi];
            double threshold = 0.0;
            bool have = false;
            for (std::size_t k = 0; k < annotated.size(); ++k) {
                const auto& s = annotated[k].summary;
                values[k] = s.c_a * pa[static_cast<std::size_t>(s.n_a)] - s.c_u * pb[static_cast<std::size_t>(s.n_u)];
                if (annotated[k].answerable && (!have || values[k] < threshold)) {
                    threshold = values[k];
                    have = true;
                }
            }
            std::size_t kept = 0;
            for (std::size_t k = 0; k < annotated.size(); ++k)
                if (!annotated[k].answerable && keeps(values[k], threshold)) ++kept;

            if (keep_trace) report.trace.push_back({grid.at(ai), grid.at(bi), double(kept) / double(n_unans)});
            if (!best_kept || kept > *best_kept) {
                best_kept = kept;
                report.params = FilterParams{grid.at(ai), grid.at(bi), threshold};
            }
        }
    }
    report.recall = double(*best_kept) / double(n_unans);
    return report;
}

inline json to_json(const FilterParams& p, double grid_step, const std::string& tuned_on) {
    return {{"alpha", p.alpha},
            {"beta", p.beta},
            {"threshold", p.threshold ? json(*p.threshold) : json(nullptr)},
            {"grid_step", grid_step},
            {"tuned_on", tuned_on}};
}

inline FilterParams params_from_json(const json& j) {
    FilterParams p;
    try {
        p.alpha = j.at("alpha").get<double>();
        p.beta = j.at("beta").get<double>();
        if (j.contains("threshold") && !j["threshold"].is_null()) p.threshold = j["threshold"].get<double>();
    } catch (const json::exception& e) {
        throw ParseError("$", std::string("filter params: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace agent::filter
