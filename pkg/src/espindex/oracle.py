"""Brute-force reference implementations used for cross-validation.

Nothing here shares parsing or rank/select code with the main modules, so
agreement between the two constitutes genuine cross-validation.  Clarity
beats speed; test fixtures stay small enough for linear scans.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

from .esp import Grammar

__all__ = ["naive_search", "naive_search_windows", "naive_expand", "naive_reverse_dict"]


def naive_search(text: bytes, pattern: bytes) -> List[int]:
    """All 1-based occurrence starts, overlaps included."""
    if len(pattern) == 0:
        raise ValueError("empty pattern")
    out: List[int] = []
    i = text.find(pattern)
    while i != -1:
        out.append(i + 1)
        i = text.find(pattern, i + 1)
    return out


def naive_search_windows(text: bytes, pattern: bytes) -> List[int]:
    """Second, independently written scan: explicit window comparison."""
    if len(pattern) == 0:
        raise ValueError("empty pattern")
    m = len(pattern)
    return [i + 1 for i in range(len(text) - m + 1) if text[i : i + m] == pattern]


def naive_expand(g: Grammar, x: int) -> bytes:
    """Expansion by explicit stack walk; no memoization, no shortcuts."""
    if not 1 <= x <= g.sigma + g.n:
        raise IndexError(f"symbol {x} out of range")
    out = bytearray()
    stack = [x]
    while stack:
        y = stack.pop()
        if y <= g.sigma:
            out.append(int(g.alphabet[y - 1]))
        else:
            stack.append(int(g.right[y]))
            stack.append(int(g.left[y]))
    return bytes(out)


def naive_reverse_dict(g: Grammar) -> Dict[Tuple[int, int], int]:
    """Exact digram -> rule-ordinal map of all rules (no creation)."""
    return {
        (int(g.left[g.sigma + k]), int(g.right[g.sigma + k])): k
        for k in range(1, g.n + 1)
    }
