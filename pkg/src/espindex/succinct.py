"""Rank/select dictionaries: plain bit vectors and integer sequences over large alphabets.

Position conventions (used consistently by the whole package):

* ``BitVector.rank(c, i)`` counts symbol ``c`` in the inclusive 0-based prefix
  ``B[0..i]``.
* ``BitVector.select(c, k)`` returns the 1-based position of the k-th ``c``.
* ``LargeAlphabetSequence.rank(c, i)`` counts ``c`` among the first ``i``
  symbols (``i`` may be 0); ``access``/``select`` are 1-based.

``select`` past the last occurrence is a normal outcome (``None``), not an
error: the reverse-dictionary simulation in the index depends on it.
"""

from __future__ import annotations

from typing import Iterable, Optional, Union

import numpy as np

__all__ = ["BitVector", "LargeAlphabetSequence"]

_WORDS_PER_BLOCK = 16  # rank directory granularity: one counter per 1024 bits
_BLOCK_SHIFT = _WORDS_PER_BLOCK.bit_length() - 1


def _to_bit_array(bits: Union[np.ndarray, Iterable[int], str]) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(ch) for ch in bits]
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit input must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bits must be 0 or 1")
    return arr


class BitVector:
    """Immutable bit string with O(1)-ish rank and near-O(1) select.

    The payload is packed into 64-bit words (LSB-first within a word).  A
    single directory of cumulative popcounts, one entry per 8 words, serves
    both rank (directory + short in-block scan) and select (binary search on
    the directory + short in-block scan), keeping the auxiliary overhead at
    12.5% of the payload.
    """

    __slots__ = ("words", "length", "ones", "_block_ones", "_block_zeros")

    def __init__(self, bits: Union[np.ndarray, Iterable[int], str]):
        arr = _to_bit_array(bits)
        self.length = int(arr.size)
        nwords = (self.length + 63) // 64
        padded = np.zeros(nwords * 64, dtype=np.uint8)
        padded[: self.length] = arr
        self.words = np.packbits(padded.reshape(-1, 8)[:, ::-1]).view(np.uint64)
        self._build_directory()

    @classmethod
    def from_words(cls, words: np.ndarray, length: int) -> "BitVector":
        bv = object.__new__(cls)
        bv.words = np.ascontiguousarray(words, dtype=np.uint64)
        bv.length = int(length)
        if bv.words.size != (bv.length + 63) // 64:
            raise ValueError("word count does not match bit length")
        if bv.length % 64:
            # mask stray bits beyond the declared length
            keep = np.uint64((1 << (bv.length % 64)) - 1)
            bv.words = bv.words.copy()
            bv.words[-1] &= keep
        bv._build_directory()
        return bv

    def _build_directory(self) -> None:
        counts = np.bitwise_count(self.words).astype(np.uint64)
        nblocks = (self.words.size + _WORDS_PER_BLOCK - 1) // _WORDS_PER_BLOCK
        per_block = np.zeros(nblocks, dtype=np.uint64)
        if counts.size:
            sums = np.add.reduceat(counts, np.arange(0, counts.size, _WORDS_PER_BLOCK))
            per_block[: sums.size] = sums
        # _block_ones[b] = ones strictly before block b; one extra entry = total
        self._block_ones = np.zeros(nblocks + 1, dtype=np.int64)
        np.cumsum(per_block, out=self._block_ones[1:])
        self.ones = int(self._block_ones[-1])
        bits_per_block = 64 * _WORDS_PER_BLOCK
        block_starts = np.arange(nblocks + 1, dtype=np.int64) * bits_per_block
        np.minimum(block_starts, self.length, out=block_starts)
        self._block_zeros = block_starts - self._block_ones

    @property
    def zeros(self) -> int:
        return self.length - self.ones

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(f"bit index {i} out of range [0, {self.length})")
        return int((int(self.words[i >> 6]) >> (i & 63)) & 1)

    def rank(self, c: int, i: int) -> int:
        """Occurrences of bit ``c`` in the inclusive prefix ``B[0..i]``."""
        if c not in (0, 1):
            raise ValueError("bit symbol must be 0 or 1")
        if not 0 <= i < self.length:
            raise IndexError(f"rank position {i} out of range [0, {self.length})")
        r1 = self._rank1_exclusive(i + 1)
        return r1 if c == 1 else (i + 1) - r1

    def _rank1_exclusive(self, i: int) -> int:
        # ones in B[0..i), 0 <= i <= length
        if i <= 0:
            return 0
        word = i >> 6
        block = word >> _BLOCK_SHIFT
        total = int(self._block_ones[block])
        w0 = block * _WORDS_PER_BLOCK
        for w in range(w0, word):
            total += int(self.words[w]).bit_count()
        rem = i & 63
        if rem:
            total += (int(self.words[word]) & ((1 << rem) - 1)).bit_count()
        return total

    def select(self, c: int, k: int) -> Optional[int]:
        """1-based position of the k-th ``c``; ``None`` if fewer than k exist."""
        if c not in (0, 1):
            raise ValueError("bit symbol must be 0 or 1")
        if k < 1:
            raise IndexError(f"select ordinal {k} must be >= 1")
        if c == 1:
            if k > self.ones:
                return None
            dir_ = self._block_ones
        else:
            if k > self.zeros:
                return None
            dir_ = self._block_zeros
        block = int(np.searchsorted(dir_, k, side="left")) - 1
        remaining = k - int(dir_[block])
        w = block * _WORDS_PER_BLOCK
        while True:
            word = int(self.words[w])
            if c == 0:
                word = ~word & 0xFFFFFFFFFFFFFFFF
            cnt = word.bit_count()
            if cnt >= remaining:
                break
            remaining -= cnt
            w += 1
        # select the remaining-th set bit inside the word
        for _ in range(remaining - 1):
            word &= word - 1
        pos = (w << 6) + ((word & -word).bit_length() - 1)
        return pos + 1

    def to_array(self) -> np.ndarray:
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return bits[: self.length]

    def directory_overhead(self) -> float:
        """Auxiliary directory bits relative to the payload (diagnostic)."""
        if self.length == 0:
            return 0.0
        aux = (self._block_ones.size + self._block_zeros.size) * 64
        return aux / self.length


def _fit_dtype(top: int):
    if top < 1 << 8:
        return np.uint8
    if top < 1 << 16:
        return np.uint16
    if top < 1 << 32:
        return np.uint32
    return np.int64


class LargeAlphabetSequence:
    """access/rank/select over an integer sequence with symbols in ``[1, bound]``.

    Backed by the symbol array plus a position index in CSR form: occurrence
    positions sorted by (symbol, position), with per-symbol offsets.  access
    and select are O(1); rank is a binary search within one symbol's
    occurrence list.  Total size stays within a small constant of
    ``n * lg(bound)`` bits.
    """

    __slots__ = ("values", "n", "bound", "_pos", "_starts")

    def __init__(self, values: Union[np.ndarray, Iterable[int]], bound: Optional[int] = None):
        vals = np.asarray(values, dtype=np.int64)
        if vals.ndim != 1:
            raise ValueError("sequence must be one-dimensional")
        self.n = int(vals.size)
        if self.n and int(vals.min()) < 1:
            raise ValueError("symbols must be >= 1")
        top = int(vals.max()) if self.n else 0
        self.bound = int(bound) if bound is not None else top
        if top > self.bound:
            raise ValueError(f"symbol {top} exceeds alphabet bound {self.bound}")
        # narrowest machine width that fits keeps the footprint near n*lg(bound)
        self.values = vals.astype(_fit_dtype(self.bound))
        order = np.argsort(vals, kind="stable")
        self._pos = order.astype(_fit_dtype(self.n))  # positions grouped by symbol
        self._starts = np.searchsorted(vals[order], np.arange(1, self.bound + 2)).astype(
            _fit_dtype(self.n)
        )

    def __len__(self) -> int:
        return self.n

    def access(self, i: int) -> int:
        """Symbol at 1-based position ``i``."""
        if not 1 <= i <= self.n:
            raise IndexError(f"access position {i} out of range [1, {self.n}]")
        return int(self.values[i - 1])

    def _slice(self, c: int) -> np.ndarray:
        if not 1 <= c <= self.bound:
            return self._pos[:0]
        return self._pos[self._starts[c - 1] : self._starts[c]]

    def rank(self, c: int, i: int) -> int:
        """Occurrences of ``c`` among the first ``i`` symbols (``i`` in [0, n])."""
        if not 0 <= i <= self.n:
            raise IndexError(f"rank prefix {i} out of range [0, {self.n}]")
        occ = self._slice(c)
        return int(np.searchsorted(occ, i, side="left"))

    def select(self, c: int, k: int) -> Optional[int]:
        """1-based position of the k-th ``c``; ``None`` if fewer than k exist."""
        if k < 1:
            raise IndexError(f"select ordinal {k} must be >= 1")
        occ = self._slice(c)
        if k > occ.size:
            return None
        return int(occ[k - 1]) + 1

    def count(self, c: int) -> int:
        return int(self._slice(c).size)
