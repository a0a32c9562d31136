#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "agent/unicode.hpp"

namespace agent::text {

/// Lowercased tokens with the byte span each was cut from.
struct TokenSeq {
    struct Span {
        std::size_t begin;  // byte offsets into the source, half-open
        std::size_t end;
    };

    std::vector<std::string> tokens;
    std::vector<Span> spans;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
};

namespace detail {

inline bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

}  // namespace detail

/// SQuAD answer normalization: lowercase, drop punctuation, drop the articles
/// a/an/the as whole tokens, collapse whitespace.
inline std::string normalize_answer(std::string_view s) {
    std::string stripped;
    stripped.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = unicode::decode_at(s, i);
        i += d.length;
        if (unicode::is_punctuation(d.cp)) continue;
        unicode::append_utf8(stripped, unicode::to_lower(d.cp));
    }

    std::string out;
    std::size_t i = 0;
    while (i < stripped.size()) {
        std::size_t start = i;
        while (start < stripped.size()) {
            const auto d = unicode::decode_at(stripped, start);
            if (!unicode::is_whitespace(d.cp)) break;
            start += d.length;
        }
        std::size_t end = start;
        while (end < stripped.size()) {
            const auto d = unicode::decode_at(stripped, end);
            if (unicode::is_whitespace(d.cp)) break;
            end += d.length;
        }
        if (end > start) {
            const std::string_view word(stripped.data() + start, end - start);
            if (!detail::is_article(word)) {
                if (!out.empty()) out.push_back(' ');
                out.append(word);
            }
        }
        i = end;
    }
    return out;
}

/// Whitespace split, then leading/trailing punctuation stripped from each piece.
inline TokenSeq word_tokenize(std::string_view s) {
    TokenSeq seq;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size()) {
            const auto d = unicode::decode_at(s, i);
            if (!unicode::is_whitespace(d.cp)) break;
            i += d.length;
        }
        std::size_t begin = i;
        std::size_t end = i;
        // Track the last non-punctuation code point so trailing punctuation is excluded.
        bool seen_core = false;
        std::size_t core_end = i;
        while (end < s.size()) {
            const auto d = unicode::decode_at(s, end);
            if (unicode::is_whitespace(d.cp)) break;
            const bool punct = unicode::is_punctuation(d.cp);
            if (!seen_core && punct) {
                begin = end + d.length;
            } else if (!punct) {
                seen_core = true;
                core_end = end + d.length;
            }
            end += d.length;
        }
        if (seen_core) {
            seq.tokens.push_back(unicode::to_lower(s.substr(begin, core_end - begin)));
            seq.spans.push_back({begin, core_end});
        }
        i = end;
    }
    return seq;
}

/// Unigrams followed by adjacent-pair bigrams: 2n-1 terms for n >= 1.
inline std::vector<std::string> bigrams(const TokenSeq& t) {
    std::vector<std::string> terms;
    if (t.empty()) return terms;
    terms.reserve(2 * t.size() - 1);
    terms.insert(terms.end(), t.tokens.begin(), t.tokens.end());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) terms.push_back(t.tokens[i] + ' ' + t.tokens[i + 1]);
    return terms;
}

inline std::vector<std::string> bigrams(std::string_view s) { return bigrams(word_tokenize(s)); }

}  // namespace agent::text
