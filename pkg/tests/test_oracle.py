import random

import pytest

from espindex.esp import build_grammar
from espindex.oracle import (
    naive_expand,
    naive_reverse_dict,
    naive_search,
    naive_search_windows,
)

from conftest import text_family


def test_search_examples():
    assert naive_search(b"aaaa", b"aa") == [1, 2, 3]
    assert naive_search(b"abc", b"d") == []


def test_search_rejects_empty_pattern():
    with pytest.raises(ValueError):
        naive_search(b"abc", b"")
    with pytest.raises(ValueError):
        naive_search_windows(b"abc", b"")


def test_two_scans_agree():
    rng = random.Random(1)
    for trial in range(200):
        t = text_family(rng, trial, rng.randrange(1, 400))
        for _ in range(10):
            m = rng.randrange(1, 8)
            st = rng.randrange(0, max(len(t) - m, 0) + 1)
            p = t[st : st + m] or t[:1]
            assert naive_search(t, p) == naive_search_windows(t, p)
            p2 = rng.randbytes(m)
            assert naive_search(t, p2) == naive_search_windows(t, p2)


def test_expand_terminal():
    g = build_grammar(b"q")
    assert naive_expand(g, g.root) == b"q"


def test_expand_matches_text():
    rng = random.Random(2)
    for trial in range(60):
        t = text_family(rng, trial, rng.randrange(1, 2000))
        g = build_grammar(t)
        assert naive_expand(g, g.root) == t


def test_expand_nested_rule():
    # X -> ab, Y -> Xa gives expand(Y) = "aba"
    g = build_grammar(b"aba")
    assert naive_expand(g, g.root) == b"aba"
    assert g.n >= 1


def test_reverse_dict_contents():
    rng = random.Random(3)
    g = build_grammar(text_family(rng, 1, 500))
    d = naive_reverse_dict(g)
    assert len(d) == g.n
    for k in range(1, g.n + 1):
        digram = (int(g.d1[k - 1]), int(g.d2[k - 1]))
        assert d[digram] == k
    # absent digrams stay absent: the oracle never creates entries
    assert (0, 0) not in d
