"""Grammar compression by edit-sensitive parsing.

Each round factorizes the current symbol string into maximal blocks:

* type1: a run ``a^k`` (k >= 2),
* type2: a run-free block of length >= the iterated-log threshold,
* type3: everything else,

then tiles every block with groups of 2 or 3 symbols.  Pairs become one rule
``A -> XY``; triples become two rules ``A -> YZ``, ``B -> XA`` (the inner
pair always groups the last two symbols, so every left child belongs to a
strictly earlier round, which keeps the concatenated left-child array
monotone after per-round renaming).  Type2 blocks are tiled around
landmarks chosen by alphabet reduction; landmark decisions depend only on a
bounded window of nearby symbols, which is what makes equal substrings parse
consistently regardless of context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

__all__ = [
    "TYPE1",
    "TYPE2",
    "TYPE3",
    "Block",
    "Grammar",
    "BuildReverseDict",
    "log_star",
    "factorize_types",
    "alphabet_reduction",
    "parse_level",
    "build_grammar",
    "expand",
    "plan_level",
]

TYPE1, TYPE2, TYPE3 = 1, 2, 3

_TOWER = (2, 4, 16, 65536, 1 << 65536)


def log_star(u: int) -> int:
    """Iterated logarithm: least i with the i-fold binary log of u at most 1."""
    if u < 1:
        raise ValueError("log_star requires u >= 1")
    for i, t in enumerate(_TOWER, start=1):
        if u <= t:
            return i
    return len(_TOWER) + 1


@dataclass(frozen=True)
class Block:
    kind: int
    start: int
    end: int  # half-open

    def __len__(self) -> int:
        return self.end - self.start


def _as_symbols(s) -> np.ndarray:
    arr = np.asarray(s, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("symbol string must be one-dimensional")
    return arr


def _factorize_arrays(s: np.ndarray, threshold: int):
    """Maximal blocks as parallel arrays (kinds, starts, ends)."""
    m = s.size
    change = np.flatnonzero(s[1:] != s[:-1]) + 1
    rstart = np.concatenate((np.zeros(1, np.int64), change))
    rend = np.concatenate((change, np.int64([m])))
    single = (rend - rstart) == 1
    # adjacent length-1 runs merge into one run-free stretch
    keep = np.ones(rstart.size, dtype=bool)
    keep[1:] = ~(single[1:] & single[:-1])
    bstart = rstart[keep]
    bend = np.concatenate((bstart[1:], np.int64([m])))
    blen = bend - bstart
    kinds = np.where(
        single[keep],
        np.where(blen >= threshold, TYPE2, TYPE3),
        TYPE1,
    ).astype(np.int64)
    return kinds, bstart, bend


def factorize_types(s, threshold: Optional[int] = None) -> List[Block]:
    """Tile ``s`` with maximal type1/type2/type3 blocks.

    ``threshold`` defaults to ``log_star(len(s))``, the run-free length a
    block needs to count as type2.
    """
    arr = _as_symbols(s)
    if arr.size < 1:
        raise ValueError("cannot factorize an empty string")
    thr = log_star(arr.size) if threshold is None else threshold
    kinds, bs, be = _factorize_arrays(arr, thr)
    return [Block(int(k), int(a), int(b)) for k, a, b in zip(kinds, bs, be)]


# ---------------------------------------------------------------------------
# alphabet reduction and landmarks
# ---------------------------------------------------------------------------


def _label_iterations(alphabet_bound: int) -> int:
    """Rounds of label reduction, fixed by the value bound alone.

    Content-independent scheduling matters: two occurrences of the same
    substring must run the same number of rounds or their landmarks drift.
    """
    t = 0
    cur = max(int(alphabet_bound), 1)
    while True:
        nxt = 2 * (cur.bit_length() - 1) + 1  # largest possible new label
        if nxt >= cur:
            return t
        cur = nxt
        t += 1


def _label_step(vals: np.ndarray) -> np.ndarray:
    """One relabeling round: position i gets 2p + bit(p, vals[i]) where p is
    the least bit in which vals[i] differs from its left neighbour."""
    prev = np.empty_like(vals)
    prev[0] = vals[0] ^ 1  # boundary sentinel: differ in bit 0
    prev[1:] = vals[:-1]
    x = vals ^ prev
    lsb = x & -x
    p = np.log2(lsb.astype(np.float64)).astype(np.int64)  # exact: lsb is a power of two
    return 2 * p + ((vals >> p) & 1)


def _remap_to_ternary(lab: np.ndarray) -> np.ndarray:
    """Replace labels above 2, one value class at a time, by the least value
    in {0,1,2} differing from both current neighbours (keeps run-freeness)."""
    mx = int(lab.max(initial=0))
    for v in range(mx, 2, -1):
        idx = np.flatnonzero(lab == v)
        if idx.size == 0:
            continue
        left = np.full(idx.size, -1, dtype=np.int64)
        has_l = idx > 0
        left[has_l] = lab[idx[has_l] - 1]
        right = np.full(idx.size, -1, dtype=np.int64)
        has_r = idx < lab.size - 1
        right[has_r] = lab[idx[has_r] + 1]
        pick = np.where(
            (left != 0) & (right != 0),
            0,
            np.where((left != 1) & (right != 1), 1, 2),
        )
        lab[idx] = pick
    return lab


def _reduce_labels(vals: np.ndarray, alphabet_bound: int) -> np.ndarray:
    lab = vals.astype(np.int64, copy=True)
    for _ in range(_label_iterations(alphabet_bound)):
        lab = _label_step(lab)
    return _remap_to_ternary(lab)


_SCALAR_CUTOFF = 64  # below this, plain-python beats numpy dispatch overhead


def _landmarks_scalar(vals, alphabet_bound: int) -> np.ndarray:
    """Scalar twin of the vectorized landmark pipeline (same results)."""
    lab = list(vals)
    m = len(lab)
    for _ in range(_label_iterations(alphabet_bound)):
        prev = lab[0] ^ 1
        nxt = []
        for v in lab:
            x = v ^ prev
            p = (x & -x).bit_length() - 1
            nxt.append(2 * p + ((v >> p) & 1))
            prev = v
        lab = nxt
    for v in range(max(lab), 2, -1):
        for i in range(m):
            if lab[i] != v:
                continue
            left = lab[i - 1] if i > 0 else -1
            right = lab[i + 1] if i < m - 1 else -1
            if left != 0 and right != 0:
                lab[i] = 0
            elif left != 1 and right != 1:
                lab[i] = 1
            else:
                lab[i] = 2
    is_max = [False] * m
    for i in range(1, m):
        if lab[i] > lab[i - 1] and (i == m - 1 or lab[i] > lab[i + 1]):
            is_max[i] = True
    lms = []
    for i in range(1, m):
        if is_max[i]:
            lms.append(i)
        elif lab[i] < lab[i - 1] and (i == m - 1 or lab[i] < lab[i + 1]):
            if not (is_max[i - 1] or (i + 1 < m and is_max[i + 1])):
                lms.append(i)
    if len(lms) >= 2 and lms[-1] == m - 2 and lms[-1] - lms[-2] == 2:
        lms[-1] = m - 1
    return np.asarray(lms, dtype=np.int64)


def _unit_landmarks(vals: np.ndarray, alphabet_bound: int) -> np.ndarray:
    if vals.size <= _SCALAR_CUTOFF:
        return _landmarks_scalar(vals.tolist(), alphabet_bound)
    return _landmarks_from_labels(_reduce_labels(vals, alphabet_bound))


def _landmarks_from_labels(lab: np.ndarray) -> np.ndarray:
    """Landmarks: local maxima, then local minima not adjacent to one.

    Position 0 is never a landmark (a landmark pairs with its left
    neighbour).  A final gap-2 landmark sitting one short of the block end is
    shifted onto the end so the trailing single never dangles.
    """
    m = lab.size
    is_max = np.zeros(m, dtype=bool)
    is_min = np.zeros(m, dtype=bool)
    if m >= 3:
        mid = lab[1:-1]
        is_max[1:-1] = (mid > lab[:-2]) & (mid > lab[2:])
        is_min[1:-1] = (mid < lab[:-2]) & (mid < lab[2:])
    if m >= 2:
        is_max[m - 1] = lab[m - 1] > lab[m - 2]
        is_min[m - 1] = lab[m - 1] < lab[m - 2]
    nb_max = np.zeros(m, dtype=bool)
    nb_max[:-1] |= is_max[1:]
    nb_max[1:] |= is_max[:-1]
    lms = np.flatnonzero(is_max | (is_min & ~nb_max))
    if lms.size >= 2 and lms[-1] == m - 2 and lms[-1] - lms[-2] == 2:
        lms = lms.copy()
        lms[-1] = m - 1
    return lms


def alphabet_reduction(block, alphabet_bound: Optional[int] = None) -> np.ndarray:
    """Landmark positions (0-based) of a run-free block of length >= 2.

    ``alphabet_bound`` is the largest symbol value the block may contain; it
    fixes the relabeling schedule and must be supplied consistently when
    landmark agreement across strings matters.
    """
    vals = _as_symbols(block)
    if vals.size < 2:
        raise ValueError("alphabet reduction needs a block of length >= 2")
    if np.any(vals[1:] == vals[:-1]):
        raise ValueError("block is not run-free (adjacent equal symbols)")
    bound = int(vals.max()) if alphabet_bound is None else int(alphabet_bound)
    return _unit_landmarks(vals, bound)


def _type2_groups(m: int, lms: np.ndarray) -> Tuple[List[int], List[int], List[int]]:
    """Tile a type2 block of length m with groups anchored at landmarks.

    Returns (starts, sizes, anchors); anchor -1 marks boundary artifacts
    (leading pad pairs) that no landmark owns.
    """
    if m == 2:
        return [0], [2], [-1]
    if m == 3:
        return [0], [3], [-1]
    starts: List[int] = []
    sizes: List[int] = []
    anchors: List[int] = []
    k = lms.size
    if k == 0:
        raise AssertionError("type2 block of length >= 4 produced no landmarks")
    lead = int(lms[0]) - 1
    if lead == 2:
        starts.append(0)
        sizes.append(2)
        anchors.append(-1)
    for idx in range(k):
        q = int(lms[idx])
        gstart, gend = q - 1, q + 1
        nxt = int(lms[idx + 1]) - 1 if idx + 1 < k else m
        if nxt - gend == 1:  # lone symbol before the next pair joins this group
            gend += 1
        anchor = q
        if idx == 0 and lead == 1:
            if gend - gstart == 2:
                gstart = 0  # leading single joins the first pair as a triple
            else:
                starts.append(0)
                sizes.append(2)
                anchors.append(-1)
                gstart = 2  # rebalance: 1 + 3 would make a 4-wide group
                anchor = -1
        starts.append(gstart)
        sizes.append(gend - gstart)
        anchors.append(anchor)
    # the tiling must be exact; anything else is a landmark-spacing bug
    pos = 0
    for st, sz in zip(starts, sizes):
        if st != pos or sz not in (2, 3):
            raise AssertionError(f"bad type2 tiling at {st} (size {sz}, expected start {pos})")
        pos += sz
    if pos != m:
        raise AssertionError(f"type2 tiling covers {pos} of {m} symbols")
    return starts, sizes, anchors


# ---------------------------------------------------------------------------
# level plan: blocks -> groups
# ---------------------------------------------------------------------------


@dataclass
class LevelPlan:
    m: int
    threshold: int
    alphabet_bound: int
    starts: np.ndarray  # group start positions
    sizes: np.ndarray  # 2 or 3
    ukind: np.ndarray  # merged block (unit) kinds
    ustart: np.ndarray
    uend: np.ndarray
    uglo: np.ndarray  # unit -> first group index
    ughi: np.ndarray  # unit -> one past last group index
    t2info: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    # unit index -> (landmark positions, per-group anchors), absolute in s


def _merge_units(kinds, bs, be, m):
    """Absorb length-1 type3 blocks into the neighbouring block (left, or the
    following block when leftmost) so every parsed unit has length >= 2."""
    drop = (kinds == TYPE3) & ((be - bs) == 1)
    keep = ~drop
    ukind = kinds[keep]
    ustart = bs[keep].copy()
    if drop.size and drop[0]:
        ustart[0] = 0
    uend = np.concatenate((ustart[1:], np.int64([m])))
    return ukind, ustart, uend


def plan_level(s, threshold: Optional[int] = None, alphabet_bound: Optional[int] = None) -> LevelPlan:
    """Grouping decisions for one parsing round (no rule creation)."""
    arr = _as_symbols(s)
    m = arr.size
    if m < 2:
        raise ValueError("a parsing round needs at least 2 symbols")
    thr = log_star(m) if threshold is None else int(threshold)
    bound = int(arr.max()) if alphabet_bound is None else int(alphabet_bound)
    kinds, bs, be = _factorize_arrays(arr, thr)
    ukind, ustart, uend = _merge_units(kinds, bs, be, m)
    ulen = uend - ustart
    nunits = ukind.size

    t2big = (ukind == TYPE2) & (ulen >= 4)
    counts = (ulen // 2).astype(np.int64)
    t2_groups: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    t2info: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for ui in np.flatnonzero(t2big):
        off = int(ustart[ui])
        vals = arr[off : int(uend[ui])]
        lms = _unit_landmarks(vals, bound)
        st, sz, anc = _type2_groups(vals.size, lms)
        counts[ui] = len(st)
        gst = np.asarray(st, dtype=np.int64) + off
        gsz = np.asarray(sz, dtype=np.int64)
        ganc = np.asarray(anc, dtype=np.int64)
        ganc[ganc >= 0] += off
        t2_groups[ui] = (gst, gsz)
        t2info[ui] = (lms + off, ganc)

    ughi = np.cumsum(counts)
    uglo = ughi - counts
    total = int(ughi[-1]) if nunits else 0
    starts = np.empty(total, dtype=np.int64)
    sizes = np.empty(total, dtype=np.int64)

    plain = np.flatnonzero(~t2big)
    if plain.size:
        g = counts[plain]
        rep = np.repeat(plain, g)
        within = np.arange(rep.size, dtype=np.int64) - np.repeat(np.cumsum(g) - g, g)
        pos = np.repeat(uglo[plain], g) + within
        st = ustart[rep] + 2 * within
        starts[pos] = st
        sizes[pos] = 2
        last = within == np.repeat(g - 1, g)
        sizes[pos[last]] = (uend[rep] - st)[last]
    for ui, (gst, gsz) in t2_groups.items():
        lo, hi = int(uglo[ui]), int(ughi[ui])
        starts[lo:hi] = gst
        sizes[lo:hi] = gsz

    return LevelPlan(
        m=m,
        threshold=thr,
        alphabet_bound=bound,
        starts=starts,
        sizes=sizes,
        ukind=ukind,
        ustart=ustart,
        uend=uend,
        uglo=uglo,
        ughi=ughi,
        t2info=t2info,
    )


# ---------------------------------------------------------------------------
# rule creation
# ---------------------------------------------------------------------------


class BuildReverseDict:
    """Digram -> symbol map used during construction and discarded afterward."""

    def __init__(self, first_id: int):
        self.map: Dict[Tuple[int, int], int] = {}
        self.first_id = first_id
        self.lefts: List[int] = []
        self.rights: List[int] = []

    def lookup(self, x: int, y: int) -> Optional[int]:
        return self.map.get((x, y))

    def lookup_or_create(self, x: int, y: int) -> int:
        z = self.map.get((x, y))
        if z is None:
            z = self.first_id + len(self.lefts)
            self.map[(x, y)] = z
            self.lefts.append(x)
            self.rights.append(y)
        return z

    def __len__(self) -> int:
        return len(self.lefts)


def parse_level(s, rdict: BuildReverseDict, threshold: Optional[int] = None,
                alphabet_bound: Optional[int] = None) -> np.ndarray:
    """One parsing round: replace each 2/3-symbol group by a variable.

    Reference implementation; creates rules through ``rdict`` in left-to-right
    group order.  Triples always produce ``A -> last two`` then ``B -> first,
    A``.
    """
    arr = _as_symbols(s)
    if arr.size < 2:
        raise ValueError("parse_level needs at least 2 symbols")
    plan = plan_level(arr, threshold, alphabet_bound)
    out = np.empty(plan.starts.size, dtype=np.int64)
    for gi in range(plan.starts.size):
        st = int(plan.starts[gi])
        if plan.sizes[gi] == 2:
            out[gi] = rdict.lookup_or_create(int(arr[st]), int(arr[st + 1]))
        else:
            inner = rdict.lookup_or_create(int(arr[st + 1]), int(arr[st + 2]))
            out[gi] = rdict.lookup_or_create(int(arr[st]), inner)
    return out


def _parse_level_batch(arr: np.ndarray, plan: LevelPlan, base_id: int):
    """Vectorized equivalent of parse_level: deduplicated rule creation in
    first-occurrence order.  Returns (output symbols, lefts, rights) with
    creation ids starting at base_id; right children of outer triple rules
    reference creation ids of the same round."""
    st = plan.starts
    sz = plan.sizes
    pair = sz == 2
    s0 = arr[st]
    a_l = np.where(pair, s0, arr[st + 1])
    a_r = arr[st + sz - 1]
    keys = (a_l << np.int64(32)) | a_r
    uq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank_of = np.empty(uq.size, dtype=np.int64)
    rank_of[order] = np.arange(uq.size)
    a_slot = rank_of[inv]  # per group: stage-A creation slot
    a_lefts = a_l[first[order]]
    a_rights = a_r[first[order]]
    na = uq.size

    tri = np.flatnonzero(~pair)
    b_l = s0[tri]
    b_ref = a_slot[tri]
    bkeys = (b_l << np.int64(32)) | b_ref
    uqb, firstb, invb = np.unique(bkeys, return_index=True, return_inverse=True)
    orderb = np.argsort(firstb, kind="stable")
    rank_b = np.empty(uqb.size, dtype=np.int64)
    rank_b[orderb] = np.arange(uqb.size)
    b_slot = rank_b[invb]
    b_lefts = b_l[firstb[orderb]]
    b_refs = b_ref[firstb[orderb]]
    nb = uqb.size

    lefts = np.concatenate((a_lefts, b_lefts))
    rights = np.concatenate((a_rights, base_id + b_refs))
    out_slot = np.where(pair, a_slot, -1)
    out_slot[tri] = na + b_slot
    return base_id + out_slot, lefts, rights


def _rename_level(lefts: np.ndarray, rights: np.ndarray, base_id: int, prev_max: int):
    """Per-round renaming making the round's left-child array monotone.

    Rules are ordered by (left child, right child); right children that
    reference this round's own rules (inner pairs of triples) compare by the
    referenced rule's rank, which always exceeds any lower-round symbol.
    Returns (perm, pi): ``perm[k]`` is the creation slot placed k-th;
    ``pi[slot]`` is the slot's final rank.
    """
    count = lefts.size
    inner = rights > prev_max
    a_idx = np.flatnonzero(~inner)
    slot_rank = np.full(count, -1, dtype=np.int64)
    a_ord = np.lexsort((rights[a_idx], lefts[a_idx]))
    slot_rank[a_idx[a_ord]] = np.arange(a_idx.size)
    d2res = rights.copy()
    if inner.any():
        ref = rights[inner] - base_id
        if np.any(slot_rank[ref] < 0):
            raise AssertionError("inner reference does not point at a first-stage rule")
        d2res[inner] = prev_max + 1 + slot_rank[ref]
    perm = np.lexsort((d2res, lefts))
    pi = np.empty(count, dtype=np.int64)
    pi[perm] = np.arange(count)
    return perm, pi


# ---------------------------------------------------------------------------
# grammar
# ---------------------------------------------------------------------------


@dataclass
class Grammar:
    """Binary grammar from edit-sensitive parsing.

    Arrays are indexed by symbol id: 0 is reserved, terminals occupy
    [1, sigma], variables [sigma+1, sigma+n].  ``left``/``right`` are 0 for
    terminals; ``lengths[x]`` is the length of the string x derives;
    ``level_of[x]`` the parsing round that created x (0 for terminals).
    """

    sigma: int
    alphabet: np.ndarray  # byte value of each terminal, ascending
    left: np.ndarray
    right: np.ndarray
    lengths: np.ndarray
    level_of: np.ndarray
    root: int
    level_lens: List[int]  # input string length of each parsing round

    @property
    def n(self) -> int:
        return self.left.size - self.sigma - 1

    @property
    def u(self) -> int:
        return int(self.lengths[self.root])

    @property
    def height(self) -> int:
        return int(self.level_of[self.root])

    @property
    def d1(self) -> np.ndarray:
        return self.left[self.sigma + 1 :]

    @property
    def d2(self) -> np.ndarray:
        return self.right[self.sigma + 1 :]

    def is_terminal(self, x: int) -> bool:
        return 1 <= x <= self.sigma

    def byte_to_terminal(self) -> np.ndarray:
        table = np.zeros(256, dtype=np.int64)
        table[self.alphabet] = np.arange(1, self.sigma + 1)
        return table

    def level_alphabet_bound(self, level: int) -> int:
        """Largest symbol id in existence when the given round started."""
        if not 1 <= level <= max(self.height, 1):
            raise IndexError(f"level {level} out of range")
        counts = np.bincount(self.level_of[self.sigma + 1 :], minlength=level)
        return self.sigma + int(counts[1:level].sum())

    def level_threshold(self, level: int) -> int:
        return log_star(self.level_lens[level - 1])

    def validate(self) -> None:
        """Structural invariants; raises AssertionError on violation."""
        n, sigma = self.n, self.sigma
        assert self.left.size == self.right.size == self.lengths.size == sigma + n + 1
        assert np.all(self.lengths[1 : sigma + 1] == 1)
        d1, d2 = self.d1, self.d2
        if n:
            assert np.all(d1 >= 1) and np.all(d2 >= 1)
            assert np.all(d1[:-1] <= d1[1:]), "left-child array is not monotone"
            ids = np.arange(sigma + 1, sigma + n + 1)
            assert np.all(self.lengths[ids] == self.lengths[d1] + self.lengths[d2])
            digrams = set(zip(d1.tolist(), d2.tolist()))
            assert len(digrams) == n, "duplicate digram"
        if self.level_lens:
            assert self.lengths[self.root] == self.level_lens[0]


def expand(g: Grammar, x: int) -> bytes:
    """The string derived from symbol ``x``, as bytes."""
    if not 1 <= x <= g.sigma + g.n:
        raise IndexError(f"symbol {x} out of range")
    ids = _expand_ids(g, x)
    return g.alphabet[ids - 1].tobytes()


def _expand_ids(g: Grammar, x: int) -> np.ndarray:
    """Terminal-id expansion, one whole layer of variables per pass."""
    cur = np.int64([x])
    sigma = g.sigma
    while True:
        var = cur > sigma
        if not var.any():
            return cur
        counts = var.astype(np.int64) + 1
        out = np.empty(int(counts.sum()), dtype=np.int64)
        pos = np.cumsum(counts) - counts
        out[pos] = np.where(var, g.left[cur], cur)
        out[pos[var] + 1] = g.right[cur[var]]
        cur = out


def build_grammar(data: bytes, reference: bool = False,
                  record_levels: Optional[List[np.ndarray]] = None) -> Grammar:
    """Parse ``data`` to a single root symbol.

    ``reference=True`` routes rule creation through the associative-map
    implementation instead of the batched one; both produce identical
    grammars.  ``record_levels``, when given a list, receives a copy of every
    intermediate symbol string (diagnostics and tests).
    """
    if len(data) == 0:
        raise ValueError("cannot index an empty text")
    raw = np.frombuffer(data, dtype=np.uint8)
    alphabet = np.unique(raw)
    sigma = int(alphabet.size)
    table = np.zeros(256, dtype=np.int64)
    table[alphabet] = np.arange(1, sigma + 1)
    s = table[raw]

    left_parts: List[np.ndarray] = []
    right_parts: List[np.ndarray] = []
    level_parts: List[np.ndarray] = []
    lengths = np.ones(sigma + 1, dtype=np.int64)
    lengths[0] = 0
    level_lens: List[int] = []
    next_base = sigma + 1
    level = 0

    while s.size > 1:
        level += 1
        level_lens.append(int(s.size))
        if record_levels is not None:
            record_levels.append(s.copy())
        thr = log_star(s.size)
        bound = next_base - 1
        if reference:
            rd = BuildReverseDict(next_base)
            out = parse_level(s, rd, thr, bound)
            lefts = np.asarray(rd.lefts, dtype=np.int64)
            rights = np.asarray(rd.rights, dtype=np.int64)
        else:
            plan = plan_level(s, thr, bound)
            out, lefts, rights = _parse_level_batch(s, plan, next_base)
        perm, pi = _rename_level(lefts, rights, next_base, next_base - 1)
        count = lefts.size
        inner = rights > next_base - 1
        new_rights = rights.copy()
        new_rights[inner] = next_base + pi[rights[inner] - next_base]
        lefts_f = lefts[perm]
        rights_f = new_rights[perm]
        # lengths in creation order, then reordered; lengths[0] == 0 so the
        # masked gather contributes nothing for same-round references
        new_len = lengths[lefts] + lengths[np.where(inner, 0, rights)]
        if inner.any():
            new_len[inner] += new_len[rights[inner] - next_base]
        lengths = np.concatenate((lengths, new_len[perm]))
        left_parts.append(lefts_f)
        right_parts.append(rights_f)
        level_parts.append(np.full(count, level, dtype=np.int64))
        s = next_base + pi[out - next_base]
        next_base += count

    if record_levels is not None:
        record_levels.append(s.copy())
    root = int(s[0])
    n = next_base - sigma - 1
    zero = np.zeros(sigma + 1, dtype=np.int64)
    g = Grammar(
        sigma=sigma,
        alphabet=alphabet,
        left=np.concatenate([zero] + left_parts) if n else zero.copy(),
        right=np.concatenate([zero] + right_parts) if n else zero.copy(),
        lengths=lengths,
        level_of=np.concatenate([zero] + level_parts) if n else zero.copy(),
        root=root,
        level_lens=level_lens if level_lens else [1],
    )
    return g
