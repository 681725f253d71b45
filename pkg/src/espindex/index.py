"""The self-index: succinct grammar encoding and count/locate/extract queries.

The grammar's left-child array (monotone after construction) is stored as a
gap-unary bit vector ``B``; the right-child array as a rank/select sequence
``A``; expansion lengths as a packed integer array.  The digram-to-rule map
that existed at build time is simulated at query time:

    p = select_0(B, i) - i
    q = select_0(B, i + 1) - (i + 1)        (q = n when that zero is absent)
    r = select_j(A, rank_j(A, p) + 1)
    rule = r  if r <= q  else  none

Positions exposed by this module are 1-based throughout; the CLI converts to
0-based at its boundary.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, List, Optional, Tuple, Union

import numpy as np

from . import esp
from .esp import Grammar, log_star
from .succinct import BitVector, LargeAlphabetSequence

__all__ = [
    "EspIndex",
    "Evidence",
    "TreeCursor",
    "encode",
    "build_index",
    "IndexLoadError",
    "MagicError",
    "VersionError",
    "TruncationError",
    "ChecksumError",
]

MAGIC = b"ESPIDX01"


class IndexLoadError(Exception):
    """Base class for index file problems."""


class MagicError(IndexLoadError):
    pass


class VersionError(IndexLoadError):
    pass


class TruncationError(IndexLoadError):
    pass


class ChecksumError(IndexLoadError):
    pass


# ---------------------------------------------------------------------------
# bit packing and CRC-64
# ---------------------------------------------------------------------------


def pack_ints(values: np.ndarray, width: int) -> np.ndarray:
    """Pack non-negative ints into little-endian u64 words, LSB-first."""
    vals = np.asarray(values, dtype=np.uint64)
    n = vals.size
    if width < 1 or width > 64:
        raise ValueError("width must be in [1, 64]")
    nwords = (n * width + 63) // 64
    words = np.zeros(nwords, dtype=np.uint64)
    if n == 0:
        return words
    bitpos = np.arange(n, dtype=np.uint64) * np.uint64(width)
    widx = (bitpos >> np.uint64(6)).astype(np.int64)
    boff = bitpos & np.uint64(63)
    np.bitwise_or.at(words, widx, vals << boff)
    spill = (boff + np.uint64(width)) > np.uint64(64)
    if spill.any():
        np.bitwise_or.at(
            words,
            widx[spill] + 1,
            vals[spill] >> (np.uint64(64) - boff[spill]),
        )
    return words


def unpack_ints(words: np.ndarray, width: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_ints`."""
    w = np.asarray(words, dtype=np.uint64)
    if width < 1 or width > 64:
        raise ValueError("width must be in [1, 64]")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    bitpos = np.arange(count, dtype=np.uint64) * np.uint64(width)
    widx = (bitpos >> np.uint64(6)).astype(np.int64)
    boff = bitpos & np.uint64(63)
    out = w[widx] >> boff
    spill = (boff + np.uint64(width)) > np.uint64(64)
    if spill.any():
        out[spill] |= w[widx[spill] + 1] << (np.uint64(64) - boff[spill])
    if width < 64:
        out &= np.uint64((1 << width) - 1)
    return out.astype(np.int64)


_CRC64_POLY = 0xC96C5795D7870F42  # CRC-64/XZ, reflected


def _crc64_tables() -> List[List[int]]:
    t0 = []
    for b in range(256):
        crc = b
        for _ in range(8):
            crc = (crc >> 1) ^ (_CRC64_POLY if crc & 1 else 0)
        t0.append(crc)
    tables = [t0]
    for k in range(1, 8):
        prev = tables[k - 1]
        tables.append([t0[prev[b] & 0xFF] ^ (prev[b] >> 8) for b in range(256)])
    return tables


_CRC_TABLES = _crc64_tables()


def crc64(data: Union[bytes, bytearray, memoryview], crc: int = 0) -> int:
    """CRC-64/XZ, slice-by-8."""
    t0, t1, t2, t3, t4, t5, t6, t7 = _CRC_TABLES
    crc ^= 0xFFFFFFFFFFFFFFFF
    mv = memoryview(data)
    n = len(mv)
    end8 = n - (n % 8)
    if end8:
        for w in np.frombuffer(mv[:end8], dtype="<u8"):
            x = crc ^ int(w)
            crc = (
                t7[x & 0xFF]
                ^ t6[(x >> 8) & 0xFF]
                ^ t5[(x >> 16) & 0xFF]
                ^ t4[(x >> 24) & 0xFF]
                ^ t3[(x >> 32) & 0xFF]
                ^ t2[(x >> 40) & 0xFF]
                ^ t1[(x >> 48) & 0xFF]
                ^ t0[(x >> 56) & 0xFF]
            )
    for b in mv[end8:]:
        crc = t0[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


# ---------------------------------------------------------------------------
# tree cursors and evidence
# ---------------------------------------------------------------------------

LEFT, RIGHT = 0, 1


@dataclass(frozen=True)
class TreeCursor:
    """A root-to-node path in the virtual parse tree.

    ``offset`` is the 1-based text position of the node's first character;
    ``path`` holds (ancestor symbol, direction taken, ancestor offset) from
    the root down.
    """

    node: int
    offset: int
    path: Tuple[Tuple[int, int, int], ...] = ()

    def depth(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class Evidence:
    """Run-length-compressed symbol string characterizing the pattern.

    Concatenated expansions of ``runs`` equal the pattern; occurrences of the
    core run's symbol in the parse tree generate every candidate match.
    """

    runs: Tuple[Tuple[int, int], ...]  # (symbol, multiplicity)
    core_index: int
    core_pattern_offset: int  # 0-based character offset of the core run in P
    total_length: int


# ---------------------------------------------------------------------------
# level metadata derivation (shared by encode and load)
# ---------------------------------------------------------------------------


def _derive_level_of(sigma: int, left: np.ndarray) -> np.ndarray:
    """Parsing round of each symbol: 1 + round of its left child.

    Left children always come from a strictly earlier round, so one resolving
    pass per round suffices.
    """
    total = left.size
    lv = np.full(total, -1, dtype=np.int64)
    lv[0 : sigma + 1] = 0
    pending = np.arange(sigma + 1, total, dtype=np.int64)
    while pending.size:
        src = lv[left[pending]]
        ready = src >= 0
        if not ready.any():
            raise IndexLoadError("cyclic or malformed rule structure")
        lv[pending[ready]] = src[ready] + 1
        pending = pending[~ready]
    return lv


def _derive_level_lens(
    left: np.ndarray,
    right: np.ndarray,
    level_starts: np.ndarray,
    height: int,
    root: int,
    u: int,
) -> List[int]:
    """Length of the symbol string entering each parsing round.

    Counts tree occurrences of every symbol top-down, excluding occurrences
    as the inner node of a 2-2-tree (those never appear in a round's output
    string).
    """
    total = left.size
    occ = np.zeros(total, dtype=np.int64)
    inner_occ = np.zeros(total, dtype=np.int64)
    occ[root] = 1
    for lv in range(height, 0, -1):
        lo, hi = int(level_starts[lv]), int(level_starts[lv + 1])
        if lo >= hi:
            continue
        ids = np.arange(lo, hi, dtype=np.int64)
        outer = right[ids] >= lo  # right child created in the same round
        oids = ids[outer]
        np.add.at(occ, left[oids], occ[oids])
        np.add.at(occ, right[oids], occ[oids])
        np.add.at(inner_occ, right[oids], occ[oids])
        pids = ids[~outer]
        np.add.at(occ, left[pids], occ[pids])
        np.add.at(occ, right[pids], occ[pids])
    lens = [u]
    for lv in range(1, height):
        lo, hi = int(level_starts[lv]), int(level_starts[lv + 1])
        lens.append(int((occ[lo:hi] - inner_occ[lo:hi]).sum()))
    return lens


# margins (in symbols) an edge-touching type2 block keeps clear of unknown
# context before its groups count as stable during pattern parsing: landmark
# decisions reach label_rounds+5 symbols left and 5 right, end conventions
# and the landmark end-shift reach 3 more from the right edge
_LEFT_MARGIN_EXTRA = 6
_RIGHT_ANCHOR_MARGIN = 8


def _stable_group_range(plan: "esp.LevelPlan", label_rounds: int) -> Tuple[int, int]:
    """Group index range [lo, hi) whose tiling cannot depend on symbols
    outside the parsed window.  lo >= hi means nothing is stable."""
    nunits = plan.ukind.size
    last = nunits - 1

    lo = int(plan.ughi[0])
    if plan.ukind[0] == esp.TYPE2 and 0 in plan.t2info:
        _, anchors = plan.t2info[0]
        need = label_rounds + _LEFT_MARGIN_EXTRA
        base = int(plan.uglo[0])
        for gi in range(base, int(plan.ughi[0])):
            if int(anchors[gi - base]) >= need:
                lo = gi
                break

    hi = int(plan.uglo[last])
    if plan.ukind[last] == esp.TYPE2 and last in plan.t2info:
        _, anchors = plan.t2info[last]
        ustart = int(plan.ustart[last])
        ulen = plan.m - ustart
        base = int(plan.uglo[last])
        for gi in range(int(plan.ughi[last]) - 1, base - 1, -1):
            a = int(anchors[gi - base])
            if a >= 0 and (a - ustart) <= ulen - _RIGHT_ANCHOR_MARGIN:
                hi = gi + 1
                break
    # a 2-long run-free stretch at the window's right edge may collapse to a
    # lone symbol in context (its last symbol can join a run seen only with
    # more text) and then merge into the unit before it: that unit is
    # unstable too
    if (
        nunits >= 2
        and plan.ukind[last] != esp.TYPE1
        and plan.m - int(plan.ustart[last]) == 2
    ):
        hi = min(hi, int(plan.uglo[last - 1]))

    return lo, hi


# ---------------------------------------------------------------------------
# the index
# ---------------------------------------------------------------------------


class EspIndex:
    """Succinct self-index over one text; immutable once constructed."""

    def __init__(
        self,
        sigma: int,
        n: int,
        u: int,
        root: int,
        alphabet: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        lengths: np.ndarray,
    ):
        self.sigma = int(sigma)
        self.n = int(n)
        self.u = int(u)
        self.root = int(root)
        self.alphabet = np.ascontiguousarray(alphabet, dtype=np.uint8)
        self._left = np.ascontiguousarray(left, dtype=np.int64)
        self._right = np.ascontiguousarray(right, dtype=np.int64)
        self._lengths = np.ascontiguousarray(lengths, dtype=np.int64)
        self.byte_to_term = np.zeros(256, dtype=np.int64)
        self.byte_to_term[self.alphabet] = np.arange(1, self.sigma + 1)

        d1 = self._left[self.sigma + 1 :]
        if self.n and np.any(d1[1:] < d1[:-1]):
            raise ValueError("left-child array must be monotone")
        total_syms = self.sigma + self.n
        # gap-unary bits padded with zeros so every symbol value has a
        # preceding zero; a rule-less grammar stores no bits at all
        bits = np.zeros(self.n + total_syms if self.n else 0, dtype=np.uint8)
        if self.n:
            ones_at = d1 + np.arange(1, self.n + 1) - 1  # 0-based bit positions
            bits[ones_at] = 1
        self.B = BitVector(bits)
        self.A = LargeAlphabetSequence(self._right[self.sigma + 1 :], bound=total_syms)

        self.level_of = _derive_level_of(self.sigma, self._left)
        self.height = int(self.level_of[self.root])
        counts = np.bincount(self.level_of[self.sigma + 1 :], minlength=self.height + 1)
        self.level_starts = np.empty(self.height + 2, dtype=np.int64)
        self.level_starts[0] = 1
        self.level_starts[1] = self.sigma + 1
        if self.height:
            np.cumsum(counts[1 : self.height + 1], out=self.level_starts[2:])
            self.level_starts[2:] += self.sigma + 1
        self.level_lens = _derive_level_lens(
            self._left, self._right, self.level_starts, self.height, self.root, self.u
        )

    # -- basic accessors ------------------------------------------------------

    def is_terminal(self, x: int) -> bool:
        return 1 <= x <= self.sigma

    def symbol_length(self, x: int) -> int:
        if not 1 <= x <= self.sigma + self.n:
            raise IndexError(f"symbol {x} out of range")
        return int(self._lengths[x])

    def d1(self, k: int) -> int:
        """Left child of rule k, via select on B."""
        if not 1 <= k <= self.n:
            raise IndexError(f"rule ordinal {k} out of range [1, {self.n}]")
        return self.B.select(1, k) - k

    def d2(self, k: int) -> int:
        """Right child of rule k, via access on A."""
        if not 1 <= k <= self.n:
            raise IndexError(f"rule ordinal {k} out of range [1, {self.n}]")
        return self.A.access(k)

    def level_threshold(self, level: int) -> int:
        if not 1 <= level <= max(self.height, 1):
            raise IndexError(f"level {level} out of range")
        return log_star(self.level_lens[level - 1])

    def level_bound(self, level: int) -> int:
        """Largest symbol id in existence when parsing round ``level`` began."""
        if not 1 <= level <= max(self.height, 1):
            raise IndexError(f"level {level} out of range")
        return int(self.level_starts[level]) - 1

    # -- reverse dictionary simulation -----------------------------------------

    def reverse_lookup(self, i: int, j: int) -> Optional[int]:
        """Rule ordinal k with children (i, j), or None.  Absence is normal."""
        total = self.sigma + self.n
        if self.n == 0 or not (1 <= i <= total and 1 <= j <= total):
            return None
        p = self.B.select(0, i) - i
        if i + 1 <= total:
            q = self.B.select(0, i + 1) - (i + 1)
        else:
            q = self.n
        r = self.A.select(j, self.A.rank(j, p) + 1)
        if r is None or r > q:
            return None
        return r

    # -- navigation -------------------------------------------------------------

    def root_cursor(self) -> TreeCursor:
        return TreeCursor(node=self.root, offset=1, path=())

    def navigate(self, cursor: TreeCursor, move: str) -> Optional[TreeCursor]:
        """Apply one cursor move; ``lra`` yields None on the rightmost spine."""
        node, off, path = cursor.node, cursor.offset, cursor.path
        if move == "parent":
            if not path:
                raise ValueError("root has no parent")
            sym, _, soff = path[-1]
            return TreeCursor(sym, soff, path[:-1])
        if move == "left_child":
            if self.is_terminal(node):
                raise ValueError("terminals have no children")
            return TreeCursor(int(self._left[node]), off, path + ((node, LEFT, off),))
        if move == "right_child":
            if self.is_terminal(node):
                raise ValueError("terminals have no children")
            l = int(self._left[node])
            return TreeCursor(
                int(self._right[node]),
                off + int(self._lengths[l]),
                path + ((node, RIGHT, off),),
            )
        if move == "lra":
            for d in range(len(path) - 1, -1, -1):
                if path[d][1] == LEFT:
                    sym, _, soff = path[d]
                    return TreeCursor(sym, soff, path[:d])
            return None
        if move == "leftmost_leafward":
            cur = cursor
            while not self.is_terminal(cur.node):
                cur = self.navigate(cur, "left_child")
            return cur
        raise ValueError(f"unknown move {move!r}")

    def _lowest_left_ancestor(self, cursor: TreeCursor) -> Optional[TreeCursor]:
        for d in range(len(cursor.path) - 1, -1, -1):
            if cursor.path[d][1] == RIGHT:
                sym, _, soff = cursor.path[d]
                return TreeCursor(sym, soff, cursor.path[:d])
        return None

    def _adjacent_right(self, cursor: TreeCursor, sym: int) -> Optional[TreeCursor]:
        """Node labeled ``sym`` whose subtree starts right after cursor's ends."""
        anc = self.navigate(cursor, "lra")
        if anc is None:
            return None
        v = self.navigate(anc, "right_child")
        want = int(self._lengths[sym])
        while True:
            if v.node == sym:
                return v
            if self.is_terminal(v.node) or int(self._lengths[v.node]) < want:
                return None
            v = self.navigate(v, "left_child")

    def _adjacent_left(self, cursor: TreeCursor, sym: int) -> Optional[TreeCursor]:
        """Node labeled ``sym`` whose subtree ends right before cursor's starts."""
        anc = self._lowest_left_ancestor(cursor)
        if anc is None:
            return None
        v = self.navigate(anc, "left_child")
        want = int(self._lengths[sym])
        while True:
            if v.node == sym:
                return v
            if self.is_terminal(v.node) or int(self._lengths[v.node]) < want:
                return None
            v = self.navigate(v, "right_child")

    # -- pattern machinery --------------------------------------------------------

    def pattern_evidence(self, pattern: bytes) -> Optional[Evidence]:
        """Parse the pattern like the builder would, resolving digrams through
        the reverse-dictionary simulation, and keep boundary symbols raw.

        None means the pattern cannot occur: either it uses a byte the text
        lacks, or a digram strictly inside the stable region has no rule.
        """
        m = len(pattern)
        if m == 0:
            raise ValueError("empty pattern")
        if m > self.u:
            return None
        ids = self.byte_to_term[np.frombuffer(pattern, dtype=np.uint8)]
        if ids.min(initial=1) == 0:
            return None
        whole = m == self.u  # no outside context exists for the full text
        w = ids
        left_syms: List[int] = []
        right_parts: List[List[int]] = []
        level = 1
        while w.size > 1 and level <= self.height:
            thr = self.level_threshold(level)
            bound = self.level_bound(level)
            plan = esp.plan_level(w, thr, bound)
            if whole:
                glo, ghi = 0, plan.starts.size
            else:
                glo, ghi = _stable_group_range(plan, esp._label_iterations(bound))
            if glo >= ghi:
                left_syms.extend(int(x) for x in w)
                w = w[:0]
                break
            lcut = int(plan.starts[glo])
            hcut = int(plan.starts[ghi - 1] + plan.sizes[ghi - 1])
            left_syms.extend(int(x) for x in w[:lcut])
            right_parts.append([int(x) for x in w[hcut:]])
            nxt = np.empty(ghi - glo, dtype=np.int64)
            for gi in range(glo, ghi):
                st = int(plan.starts[gi])
                if plan.sizes[gi] == 2:
                    k = self.reverse_lookup(int(w[st]), int(w[st + 1]))
                    if k is None:
                        return None
                    nxt[gi - glo] = self.sigma + k
                else:
                    ka = self.reverse_lookup(int(w[st + 1]), int(w[st + 2]))
                    if ka is None:
                        return None
                    kb = self.reverse_lookup(int(w[st]), self.sigma + ka)
                    if kb is None:
                        return None
                    nxt[gi - glo] = self.sigma + kb
            w = nxt
            level += 1
        syms = left_syms + [int(x) for x in w]
        for part in reversed(right_parts):
            syms.extend(part)
        runs: List[Tuple[int, int]] = []
        for s in syms:
            if runs and runs[-1][0] == s:
                runs[-1] = (s, runs[-1][1] + 1)
            else:
                runs.append((s, 1))
        best, best_len, off, core_off = 0, -1, 0, 0
        for idx, (s, r) in enumerate(runs):
            slen = int(self._lengths[s])
            if slen > best_len or (slen == best_len and s < runs[best][0]):
                best, best_len, core_off = idx, slen, off
            off += slen * r
        if off != m:
            raise AssertionError(f"evidence expansion covers {off} of {m} chars")
        return Evidence(
            runs=tuple(runs),
            core_index=best,
            core_pattern_offset=core_off,
            total_length=m,
        )

    def _contains_mask(self, q: int) -> np.ndarray:
        mask = np.zeros(self.sigma + self.n + 1, dtype=bool)
        mask[q] = True
        for lv in range(1, self.height + 1):
            lo, hi = int(self.level_starts[lv]), int(self.level_starts[lv + 1])
            if lo >= hi:
                continue
            ids = np.arange(lo, hi, dtype=np.int64)
            inner = self._right[ids] >= lo
            plain = ids[~inner]  # both children from earlier rounds: resolved
            mask[plain] |= mask[self._left[plain]] | mask[self._right[plain]]
            outer = ids[inner]
            mask[outer] |= mask[self._left[outer]] | mask[self._right[outer]]
        return mask

    def core_occurrences(self, q: int) -> np.ndarray:
        """1-based start positions of every parse-tree node labeled q, ascending."""
        if not 1 <= q <= self.sigma + self.n:
            raise IndexError(f"symbol {q} out of range")
        mask = self._contains_mask(q)
        if not mask[self.root]:
            return np.empty(0, dtype=np.int64)
        nodes = np.int64([self.root])
        offs = np.int64([1])
        found: List[np.ndarray] = []
        while nodes.size:
            hit = nodes == q
            if hit.any():
                found.append(offs[hit])
                nodes, offs = nodes[~hit], offs[~hit]
            if not nodes.size:
                break
            l = self._left[nodes]
            r = self._right[nodes]
            lo = offs
            ro = offs + self._lengths[l]
            kl = mask[l]
            kr = mask[r]
            nodes = np.concatenate((l[kl], r[kr]))
            offs = np.concatenate((lo[kl], ro[kr]))
        if not found:
            return np.empty(0, dtype=np.int64)
        out = np.concatenate(found)
        out.sort()
        return out

    def _core_cursors(self, q: int) -> Iterable[TreeCursor]:
        """Cursor-yielding variant of core_occurrences, left-to-right."""
        mask = self._contains_mask(q)
        if not mask[self.root]:
            return
        stack = [self.root_cursor()]
        while stack:
            cur = stack.pop()
            if cur.node == q:
                yield cur
                continue
            if self.is_terminal(cur.node):
                continue
            rc = self.navigate(cur, "right_child")
            if mask[rc.node]:
                stack.append(rc)
            lc = self.navigate(cur, "left_child")
            if mask[lc.node]:
                stack.append(lc)

    def verify_candidate(self, start: int, pattern: bytes) -> bool:
        """True iff the text window at ``start`` equals the pattern."""
        m = len(pattern)
        if start < 1 or start + m - 1 > self.u:
            raise IndexError(f"window [{start}, {start + m}) out of range")
        return self.extract(start, m) == pattern

    def embed_evidence(self, core_cursor: TreeCursor, ev: Evidence) -> bool:
        """Adjacency-walk embedding of the evidence around one core node.

        Decides the same predicate as verify_candidate at the implied start:
        in a true occurrence every evidence symbol is an actual tree node, so
        matching them along adjacent spines left and right of the core either
        succeeds completely or the window differs from the pattern.
        """
        q, r = ev.runs[ev.core_index]
        if core_cursor.node != q:
            raise ValueError("cursor is not positioned on the core symbol")
        cur = core_cursor
        for _ in range(r - 1):
            cur = self._adjacent_right(cur, q)
            if cur is None:
                return False
        for sym, mult in ev.runs[ev.core_index + 1 :]:
            for _ in range(mult):
                cur = self._adjacent_right(cur, sym)
                if cur is None:
                    return False
        cur = core_cursor
        for sym, mult in reversed(ev.runs[: ev.core_index]):
            for _ in range(mult):
                cur = self._adjacent_left(cur, sym)
                if cur is None:
                    return False
        return True

    # -- queries ---------------------------------------------------------------

    @staticmethod
    def _chain_lengths(occ: np.ndarray, step: int) -> np.ndarray:
        """For each occurrence, how many occurrences follow it spaced ``step``."""
        ends = np.flatnonzero(np.diff(occ) != step)
        ends = np.concatenate((ends, np.int64([occ.size - 1])))
        grp_end = ends[np.searchsorted(ends, np.arange(occ.size))]
        return grp_end - np.arange(occ.size) + 1

    def _candidates(self, ev: Evidence, m: int) -> Tuple[np.ndarray, int]:
        """Sorted unique candidate starts from core occurrences (pre-verify)."""
        q, r = ev.runs[ev.core_index]
        occ = self.core_occurrences(q)
        occ_c = int(occ.size)
        if occ_c == 0:
            return np.empty(0, dtype=np.int64), 0
        if r > 1:
            occ = occ[self._chain_lengths(occ, int(self._lengths[q])) >= r]
        cand = occ - ev.core_pattern_offset
        cand = cand[(cand >= 1) & (cand + m - 1 <= self.u)]
        return np.unique(cand), occ_c

    def _run_filter(self, cand: np.ndarray, sym: int, mult: int, char_off: int) -> np.ndarray:
        """Keep candidates that have ``mult`` consecutive sym-nodes starting
        at relative character offset ``char_off``."""
        occ = self.core_occurrences(sym)
        if occ.size == 0:
            return cand[:0]
        need = cand + char_off
        idx = np.minimum(np.searchsorted(occ, need), occ.size - 1)
        ok = occ[idx] == need
        if mult > 1:
            chain = self._chain_lengths(occ, int(self._lengths[sym]))
            ok &= chain[idx] >= mult
        return cand[ok]

    _VERIFY_FALLBACK = 64  # few enough survivors: extraction beats more occ scans

    def locate(self, pattern: bytes, _stats: Optional[dict] = None) -> List[int]:
        """All 1-based start positions of the pattern, ascending, no duplicates."""
        if len(pattern) == 0:
            raise ValueError("empty pattern")
        ev = self.pattern_evidence(pattern)
        if ev is None:
            if _stats is not None:
                _stats.update(occ_c=0, candidates=0, evidence_runs=0)
            return []
        cand, occ_c = self._candidates(ev, len(pattern))
        if _stats is not None:
            _stats.update(occ_c=occ_c, candidates=int(cand.size), evidence_runs=len(ev.runs))
        if len(ev.runs) == 1:
            # the chain of core nodes covers the whole window: already proven
            return cand.tolist()
        # confirm the remaining runs by node membership (equivalent to the
        # adjacency embedding); fall back to extraction once few remain
        offs: List[int] = []
        off = 0
        for sym, mult in ev.runs:
            offs.append(off)
            off += int(self._lengths[sym]) * mult
        order = sorted(
            (ri for ri in range(len(ev.runs)) if ri != ev.core_index),
            key=lambda ri: -int(self._lengths[ev.runs[ri][0]]),
        )
        confirmed_all = True
        for ri in order:
            if cand.size <= self._VERIFY_FALLBACK:
                confirmed_all = False
                break
            sym, mult = ev.runs[ri]
            cand = self._run_filter(cand, sym, mult, offs[ri])
        if confirmed_all:
            return cand.tolist()
        return [int(c) for c in cand if self.verify_candidate(int(c), pattern)]

    def count(self, pattern: bytes) -> int:
        """Number of occurrences (the size of locate's answer)."""
        return len(self.locate(pattern))

    def extract(self, i: int, m: int) -> bytes:
        """Text window T[i .. i+m-1] (1-based), reconstructed from the grammar."""
        if m < 0:
            raise IndexError("negative extraction length")
        if m == 0:
            if not 1 <= i <= self.u + 1:
                raise IndexError(f"position {i} out of range")
            return b""
        if i < 1 or i + m - 1 > self.u:
            raise IndexError(f"window [{i}, {i + m}) out of range [1, {self.u}]")
        pieces: List[int] = []
        stack = [(self.root, 1)]
        hi = i + m
        lengths, left, right = self._lengths, self._left, self._right
        while stack:
            x, st = stack.pop()
            en = st + int(lengths[x])
            if en <= i or st >= hi:
                continue
            if st >= i and en <= hi:
                pieces.append(x)
                continue
            l = int(left[x])
            stack.append((int(right[x]), st + int(lengths[l])))
            stack.append((l, st))
        out = bytearray()
        sigma, alpha = self.sigma, self.alphabet
        for x in pieces:
            if int(lengths[x]) <= 2048:
                estack = [x]
                while estack:
                    y = estack.pop()
                    if y <= sigma:
                        out.append(alpha[y - 1])
                    else:
                        estack.append(int(right[y]))
                        estack.append(int(left[y]))
            else:
                ids = _expand_ids(self, x)
                out += self.alphabet[ids - 1].tobytes()
        return bytes(out)

    # -- sizes and serialization --------------------------------------------------

    def _widths(self) -> Tuple[int, int]:
        d2_width = max(1, (self.sigma + self.n).bit_length())
        len_width = max(1, self.u.bit_length())
        return d2_width, len_width

    def component_bits(self) -> dict:
        d2_width, len_width = self._widths()
        return {"B": self.B.length, "A": self.n * d2_width, "len": self.n * len_width}

    def stats(self) -> dict:
        comp = self.component_bits()
        return {
            "u": self.u,
            "sigma": self.sigma,
            "n": self.n,
            "root": self.root,
            "height": self.height,
            "b_bits": comp["B"],
            "a_bits": comp["A"],
            "len_bits": comp["len"],
        }

    def serialize(self, sink: BinaryIO) -> int:
        """Write the self-describing index file; returns bytes written."""
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<QQQQ", self.u, self.sigma, self.n, self.root))
        table = np.zeros(256, dtype="<u2")
        table[self.alphabet] = np.arange(1, self.sigma + 1, dtype="<u2")
        buf.write(table.tobytes())
        buf.write(struct.pack("<Q", self.B.length))
        buf.write(self.B.words.astype("<u8").tobytes())
        d2_width, len_width = self._widths()
        d2_words = pack_ints(self._right[self.sigma + 1 :], d2_width)
        buf.write(struct.pack("<BQ", d2_width, d2_words.size))
        buf.write(d2_words.astype("<u8").tobytes())
        len_words = pack_ints(self._lengths[self.sigma + 1 :], len_width)
        buf.write(struct.pack("<BQ", len_width, len_words.size))
        buf.write(len_words.astype("<u8").tobytes())
        payload = buf.getvalue()
        sink.write(payload)
        sink.write(struct.pack("<Q", crc64(payload)))
        return len(payload) + 8

    def save(self, path: str) -> int:
        with open(path, "wb") as fh:
            return self.serialize(fh)

    @classmethod
    def deserialize(cls, source: Union[BinaryIO, bytes, bytearray]) -> "EspIndex":
        data = source if isinstance(source, (bytes, bytearray)) else source.read()
        data = bytes(data)
        if len(data) < 8:
            raise MagicError("file too short for a magic number")
        if data[:8] != MAGIC:
            if data[:6] == MAGIC[:6]:
                raise VersionError(f"unsupported format version {data[6:8]!r}")
            raise MagicError(f"bad magic {data[:8]!r}")
        off = 8

        def take(count: int, what: str) -> bytes:
            nonlocal off
            if off + count > len(data):
                raise TruncationError(f"file ends inside {what}")
            chunk = data[off : off + count]
            off += count
            return chunk

        u, sigma, n, root = struct.unpack("<QQQQ", take(32, "header"))
        table = np.frombuffer(take(512, "alphabet map"), dtype="<u2").astype(np.int64)
        (b_bits,) = struct.unpack("<Q", take(8, "bit vector length"))
        b_wordcount = (b_bits + 63) // 64
        b_words = np.frombuffer(take(8 * b_wordcount, "bit vector"), dtype="<u8")
        d2_width, d2_wordcount = struct.unpack("<BQ", take(9, "A header"))
        d2_words = np.frombuffer(take(8 * d2_wordcount, "A payload"), dtype="<u8")
        len_width, len_wordcount = struct.unpack("<BQ", take(9, "len header"))
        len_words = np.frombuffer(take(8 * len_wordcount, "len payload"), dtype="<u8")
        if len(data) - off < 8:
            raise TruncationError("file ends inside the checksum")
        if len(data) - off > 8:
            raise TruncationError("trailing bytes after the checksum")
        stored_crc = struct.unpack("<Q", data[off:])[0]
        if crc64(data[:off]) != stored_crc:
            raise ChecksumError("checksum mismatch")
        if d2_width < 1 or d2_width > 64 or len_width < 1 or len_width > 64:
            raise IndexLoadError("invalid packed-array width")
        if (n * d2_width + 63) // 64 != d2_wordcount:
            raise TruncationError("A word count does not match n")
        if (n * len_width + 63) // 64 != len_wordcount:
            raise TruncationError("len word count does not match n")

        present = np.flatnonzero(table)
        if present.size != sigma:
            raise IndexLoadError("alphabet map disagrees with sigma")
        alphabet = present[np.argsort(table[present])].astype(np.uint8)

        bv = BitVector.from_words(b_words.copy(), int(b_bits))
        ones_pos = np.flatnonzero(bv.to_array() == 1)
        if ones_pos.size != n:
            raise IndexLoadError("bit vector does not encode n rules")
        d1 = ones_pos + 1 - np.arange(1, n + 1)
        d2 = unpack_ints(d2_words, d2_width, n)
        lens = unpack_ints(len_words, len_width, n)
        if n and (
            d1.min() < 1 or d1.max() > sigma + n or d2.min() < 1 or d2.max() > sigma + n
        ):
            raise IndexLoadError("rule references out of range")
        total = sigma + n + 1
        left = np.zeros(total, dtype=np.int64)
        right = np.zeros(total, dtype=np.int64)
        lengths = np.zeros(total, dtype=np.int64)
        lengths[1 : sigma + 1] = 1
        if n:
            left[sigma + 1 :] = d1
            right[sigma + 1 :] = d2
            lengths[sigma + 1 :] = lens
        idx = cls(
            sigma=sigma,
            n=n,
            u=u,
            root=root,
            alphabet=alphabet,
            left=left,
            right=right,
            lengths=lengths,
        )
        if not 1 <= root <= sigma + n or idx.symbol_length(root) != u:
            raise IndexLoadError("root length disagrees with text length")
        return idx

    @classmethod
    def load(cls, path: str) -> "EspIndex":
        with open(path, "rb") as fh:
            return cls.deserialize(fh)


def _expand_ids(index: EspIndex, x: int) -> np.ndarray:
    cur = np.int64([x])
    sigma = index.sigma
    while True:
        var = cur > sigma
        if not var.any():
            return cur
        counts = var.astype(np.int64) + 1
        out = np.empty(int(counts.sum()), dtype=np.int64)
        pos = np.cumsum(counts) - counts
        out[pos] = np.where(var, index._left[cur], cur)
        out[pos[var] + 1] = index._right[cur[var]]
        cur = out


def encode(g: Grammar) -> EspIndex:
    """Build the succinct index from a grammar; the grammar may be discarded."""
    return EspIndex(
        sigma=g.sigma,
        n=g.n,
        u=g.u,
        root=g.root,
        alphabet=g.alphabet,
        left=g.left,
        right=g.right,
        lengths=g.lengths,
    )


def build_index(data: bytes) -> EspIndex:
    """Parse and encode in one step."""
    return encode(esp.build_grammar(data))
