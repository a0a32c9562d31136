#!/usr/bin/env python3
"""Regenerates include/agent/detail/unicode_tables.hpp from Python's unicodedata."""
import sys
import unicodedata


def ranges(pred):
    out, start, prev = [], None, None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
            prev = cp
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out


def is_punct(cp):
    return unicodedata.category(chr(cp)).startswith("P")


def lower_pairs():
    pairs = []
    for cp in range(0x110000):
        c = chr(cp)
        lo = c.lower()
        if len(lo) == 1 and lo != c:
            pairs.append((cp, ord(lo)))
    return pairs


def main(path):
    punct = ranges(is_punct)
    lower = lower_pairs()
    with open(path, "w") as f:
        f.write("// Generated by scripts/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
                % unicodedata.unidata_version)
        f.write("#pragma once\n\n#include <array>\n#include <cstdint>\n#include <utility>\n\n")
        f.write("namespace agent::detail {\n\n")
        f.write("inline constexpr std::array<std::pair<char32_t, char32_t>, %d> kPunctuationRanges{{\n" % len(punct))
        for a, b in punct:
            f.write("    {0x%04X, 0x%04X},\n" % (a, b))
        f.write("}};\n\n")
        f.write("inline constexpr std::array<std::pair<char32_t, char32_t>, %d> kLowercaseMap{{\n" % len(lower))
        for a, b in lower:
            f.write("    {0x%04X, 0x%04X},\n" % (a, b))
        f.write("}};\n\n}  // namespace agent::detail\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "include/agent/detail/unicode_tables.hpp")
