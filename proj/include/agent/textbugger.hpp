#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agent/corpus.hpp"
#include "agent/error.hpp"
#include "agent/rng.hpp"
#include "agent/unicode.hpp"

namespace agent::textbugger {

using json = nlohmann::json;

enum class BugType { Insert, Delete, Swap, SubstituteChar };

inline constexpr std::array<BugType, 4> kBugTypes{BugType::Insert, BugType::Delete, BugType::Swap,
                                                  BugType::SubstituteChar};

inline const char* to_string(BugType t) {
    switch (t) {
        case BugType::Insert: return "insert";
        case BugType::Delete: return "delete";
        case BugType::Swap: return "swap";
        case BugType::SubstituteChar: return "substitute_char";
    }
    return "insert";
}

using SubstitutionMap = std::map<char32_t, char32_t>;

/// Visually similar replacements; extend per deployment.
inline SubstitutionMap default_substitutions() {
    return {{U'o', U'0'}, {U'l', U'1'}, {U'i', U'1'}, {U'a', U'@'},
            {U'e', U'3'}, {U's', U'$'}, {U'0', U'o'}, {U'1', U'l'}};
}

struct AttackConfig {
    std::size_t num_attack = 1;
    std::uint64_t rng_seed = 0;
    std::size_t min_token_len = 3;
    SubstitutionMap substitutions = default_substitutions();

    void validate() const {
        if (num_attack < 1) throw ValidationError("num_attack must be >= 1");
        if (min_token_len < 2) throw ValidationError("min_token_len must be >= 2");
    }
};

/// Positions where `type` changes `token` (code-point indices).
///   Insert: gap before index p, p in 1..len-1.
///   Delete: index p in 1..len-1; the first character is never removed.
///   Swap: exchange p and p+1, p in 1..len-2, skipping equal pairs.
///   SubstituteChar: any index whose character has a different mapped replacement.
inline std::vector<std::size_t> valid_positions(const std::u32string& token, BugType type,
                                                const SubstitutionMap& subs) {
    std::vector<std::size_t> out;
    const std::size_t n = token.size();
    switch (type) {
        case BugType::Insert:
        case BugType::Delete:
            for (std::size_t p = 1; p < n; ++p) out.push_back(p);
            break;
        case BugType::Swap:
            for (std::size_t p = 1; p + 1 < n; ++p)
                if (token[p] != token[p + 1]) out.push_back(p);
            break;
        case BugType::SubstituteChar:
            for (std::size_t p = 0; p < n; ++p) {
                auto it = subs.find(token[p]);
                if (it != subs.end() && it->second != token[p]) out.push_back(p);
            }
            break;
    }
    return out;
}

inline std::string bug(const std::string& token, BugType type, std::size_t position,
                       const SubstitutionMap& subs = default_substitutions(), std::size_t min_token_len = 3) {
    auto cps = unicode::to_u32(token);
    if (cps.size() < min_token_len)
        throw ValidationError("token '" + token + "' shorter than " + std::to_string(min_token_len) + " characters");
    const auto valid = valid_positions(cps, type, subs);
    if (std::find(valid.begin(), valid.end(), position) == valid.end())
        throw ValidationError(std::string("invalid position ") + std::to_string(position) + " for " + to_string(type) +
                              " on '" + token + "'");
    switch (type) {
        case BugType::Insert: cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(position), U' '); break;
        case BugType::Delete: cps.erase(cps.begin() + static_cast<std::ptrdiff_t>(position)); break;
        case BugType::Swap: std::swap(cps[position], cps[position + 1]); break;
        case BugType::SubstituteChar: cps[position] = subs.at(cps[position]); break;
    }
    return unicode::to_utf8(cps);
}

struct BugResult {
    std::string token;
    BugType type;
    std::size_t position;
};

/// Draws a bug type and a position uniformly until the token changes.
inline BugResult generate_bug(const std::string& token, Rng& rng, const SubstitutionMap& subs = default_substitutions(),
                              std::size_t min_token_len = 3) {
    const auto cps = unicode::to_u32(token);
    if (cps.size() < min_token_len)
        throw ValidationError("token '" + token + "' shorter than " + std::to_string(min_token_len) + " characters");
    bool any = false;
    for (auto t : kBugTypes) any = any || !valid_positions(cps, t, subs).empty();
    if (!any) throw ValidationError("no bug operator applies to '" + token + "'");

    for (;;) {
        const auto type = kBugTypes[uniform_index(rng, kBugTypes.size())];
        const auto positions = valid_positions(cps, type, subs);
        if (positions.empty()) continue;
        const auto pos = positions[uniform_index(rng, positions.size())];
        auto out = bug(token, type, pos, subs, min_token_len);
        if (out != token) return {std::move(out), type, pos};
    }
}

/// Whitespace-delimited token spans (bytes) of a question.
inline std::vector<std::pair<std::size_t, std::size_t>> token_spans(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size()) {
            const auto d = unicode::decode_at(s, i);
            if (!unicode::is_whitespace(d.cp)) break;
            i += d.length;
        }
        const std::size_t begin = i;
        while (i < s.size()) {
            const auto d = unicode::decode_at(s, i);
            if (unicode::is_whitespace(d.cp)) break;
            i += d.length;
        }
        if (i > begin) spans.emplace_back(begin, i);
    }
    return spans;
}

struct AttackEdit {
    std::size_t token_index;
    BugType type;
    std::string before;
    std::string after;
};

struct AttackResult {
    std::string question;
    std::vector<AttackEdit> edits;  // ascending token_index
};

/// Perturbs min(num_attack, eligible) distinct tokens of length >= min_token_len,
/// leaving every other byte of the question untouched.
inline AttackResult attack_question(const std::string& question, const AttackConfig& cfg) {
    cfg.validate();
    const auto spans = token_spans(question);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        // Insert always applies once length >= 2, so length alone decides eligibility.
        const auto len = unicode::length(std::string_view(question).substr(spans[i].first, spans[i].second - spans[i].first));
        if (len >= cfg.min_token_len) eligible.push_back(i);
    }
    if (eligible.empty()) throw ValidationError("no token of length >= " + std::to_string(cfg.min_token_len) + " to attack");

    auto rng = make_rng(cfg.rng_seed);
    auto picks = sample_without_replacement(rng, eligible.size(), std::min(cfg.num_attack, eligible.size()));
    std::sort(picks.begin(), picks.end());

    AttackResult res;
    std::size_t cursor = 0;
    for (auto pick : picks) {
        const auto idx = eligible[pick];
        const auto [b, e] = spans[idx];
        res.question.append(question, cursor, b - cursor);
        const std::string before = question.substr(b, e - b);
        auto bugged = generate_bug(before, rng, cfg.substitutions, cfg.min_token_len);
        res.question += bugged.token;
        res.edits.push_back({idx, bugged.type, before, std::move(bugged.token)});
        cursor = e;
    }
    res.question.append(question, cursor, std::string::npos);
    return res;
}

/// Per-question seed independent of dataset order.
inline std::uint64_t question_seed(std::uint64_t seed, std::string_view qid) { return splitmix64(seed ^ stable_hash(qid)); }

struct AttackedDataset {
    corpus::Dataset dataset;
    json sidecar = json::object();  // qid -> [{token_index, bug_type, before, after}]
    std::size_t attacked = 0;
    std::size_t skipped = 0;  // no eligible token; question left unchanged
};

inline AttackedDataset attack_dataset(const corpus::Dataset& ds, AttackConfig cfg) {
    cfg.validate();
    AttackedDataset out;
    out.dataset.docs = ds.docs;
    const auto base_seed = cfg.rng_seed;
    for (const auto& ex : ds.examples) {
        auto attacked = ex;
        cfg.rng_seed = question_seed(base_seed, ex.qid);
        try {
            auto res = attack_question(ex.question, cfg);
            attacked.question = std::move(res.question);
            attacked.origin = corpus::Origin::Attacked;
            json edits = json::array();
            for (const auto& e : res.edits)
                edits.push_back({{"token_index", e.token_index}, {"bug_type", to_string(e.type)}, {"before", e.before},
                                 {"after", e.after}});
            out.sidecar[ex.qid] = std::move(edits);
            ++out.attacked;
        } catch (const ValidationError&) {
            ++out.skipped;
        }
        out.dataset.examples.push_back(std::move(attacked));
    }
    return out;
}

}  // namespace agent::textbugger
