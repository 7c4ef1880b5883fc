"""Text normalization used for value identity and partial-credit scoring.

Two values are "the same" when their normalized forms are equal: leading and
trailing whitespace trimmed, internal whitespace runs collapsed to one space,
and case folded.  Original casing is preserved everywhere for display.
"""

from __future__ import annotations

import re

_WS_RUN = re.compile(r"\s+")


def normalize_value(text: str) -> str:
    """Canonical form used for matching and updating values."""
    return _WS_RUN.sub(" ", text.strip()).casefold()


def values_equal(a: str, b: str) -> bool:
    return normalize_value(a) == normalize_value(b)


def lcs_length(a: str, b: str) -> int:
    """Length of the longest common substring (contiguous) of two strings.

    Classic O(|a|*|b|) dynamic program over suffix-match lengths; only the
    previous row is kept.
    """
    if not a or not b:
        return 0
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best
