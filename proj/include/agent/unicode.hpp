#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "agent/detail/unicode_tables.hpp"

namespace agent::unicode {

struct Decoded {
    char32_t cp;
    std::size_t length;  // bytes consumed
};

/// Decodes one code point at `pos`. Invalid sequences decode as U+FFFD over one byte.
inline Decoded decode_at(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (pos + len > s.size()) return {0xFFFD, 1};
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::u32string to_u32(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode_at(s, i);
        out.push_back(d.cp);
        i += d.length;
    }
    return out;
}

inline std::string to_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append_utf8(out, cp);
    return out;
}

/// Number of code points; SQuAD character offsets count these.
inline std::size_t length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); i += decode_at(s, i).length) ++n;
    return n;
}

/// Byte offset of the `index`-th code point, or npos when past the end.
inline std::size_t byte_offset(std::string_view s, std::size_t index) {
    std::size_t i = 0;
    for (std::size_t n = 0; n < index; ++n) {
        if (i >= s.size()) return std::string_view::npos;
        i += decode_at(s, i).length;
    }
    return i <= s.size() ? i : std::string_view::npos;
}

inline std::size_t char_offset(std::string_view s, std::size_t byte_pos) {
    return length(s.substr(0, byte_pos));
}

/// General category P*.
inline bool is_punctuation(char32_t cp) {
    const auto& r = detail::kPunctuationRanges;
    auto it = std::upper_bound(r.begin(), r.end(), cp,
                               [](char32_t c, const auto& range) { return c < range.first; });
    return it != r.begin() && cp <= std::prev(it)->second;
}

/// The Unicode White_Space property.
inline bool is_whitespace(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F || cp == 0x3000;
}

/// Simple (one-to-one) lowercase mapping.
inline char32_t to_lower(char32_t cp) {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    const auto& m = detail::kLowercaseMap;
    auto it = std::lower_bound(m.begin(), m.end(), cp,
                               [](const auto& entry, char32_t c) { return entry.first < c; });
    return (it != m.end() && it->first == cp) ? it->second : cp;
}

inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode_at(s, i);
        append_utf8(out, to_lower(d.cp));
        i += d.length;
    }
    return out;
}

}  // namespace agent::unicode
