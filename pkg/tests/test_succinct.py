import random

import numpy as np
import pytest

from espindex.succinct import BitVector, LargeAlphabetSequence


class TestBitVector:
    def test_rank_examples(self):
        bv = BitVector("0110101")
        assert bv.rank(1, 0) == 0
        assert bv.rank(1, 6) == 4
        assert bv.rank(0, 3) == 2

    def test_select_examples(self):
        bv = BitVector("0110101")
        assert bv.select(1, 1) == 2
        assert bv.select(0, 3) == 6
        assert bv.select(0, 4) is None  # only three zeros: not-found, not error

    def test_range_errors(self):
        bv = BitVector("0110101")
        with pytest.raises(IndexError):
            bv.rank(1, 7)
        with pytest.raises(IndexError):
            bv.rank(0, -1)
        with pytest.raises(IndexError):
            bv.select(1, 0)

    def test_rank_zero_plus_rank_one(self):
        rng = random.Random(1)
        bv = BitVector([rng.randrange(2) for _ in range(3000)])
        for i in (0, 1, 17, 511, 512, 513, 2999):
            assert bv.rank(0, i) + bv.rank(1, i) == i + 1

    @pytest.mark.parametrize("density", [0.02, 0.5, 0.97])
    def test_against_linear_scan(self, density):
        rng = random.Random(int(density * 100))
        bits = [1 if rng.random() < density else 0 for _ in range(20000)]
        bv = BitVector(bits)
        prefix = np.cumsum(bits)
        ones_pos = [i + 1 for i, b in enumerate(bits) if b]
        zeros_pos = [i + 1 for i, b in enumerate(bits) if not b]
        for _ in range(2000):
            i = rng.randrange(len(bits))
            assert bv.rank(1, i) == prefix[i]
            assert bv.rank(0, i) == i + 1 - prefix[i]
        for k in range(1, len(ones_pos) + 1, 7):
            assert bv.select(1, k) == ones_pos[k - 1]
        for k in range(1, len(zeros_pos) + 1, 7):
            assert bv.select(0, k) == zeros_pos[k - 1]
        assert bv.select(1, len(ones_pos) + 1) is None

    def test_select_rank_inversion(self):
        rng = random.Random(9)
        bv = BitVector([rng.randrange(2) for _ in range(5000)])
        for c in (0, 1):
            total = bv.ones if c else bv.zeros
            for k in range(1, total + 1, 11):
                p = bv.select(c, k)
                assert bv.rank(c, p - 1) == k  # rank at the 1-based position, inclusive

    def test_large_vector_random_probes(self):
        rng = random.Random(3)
        n = 10**6
        bits = np.frombuffer(rng.randbytes(n), dtype=np.uint8) & 1
        bv = BitVector(bits)
        prefix = np.cumsum(bits, dtype=np.int64)
        for _ in range(10**4):
            i = rng.randrange(n)
            assert bv.rank(1, i) == prefix[i]
        ones = int(prefix[-1])
        ones_pos = np.flatnonzero(bits == 1) + 1
        for _ in range(2000):
            k = rng.randrange(1, ones + 1)
            assert bv.select(1, k) == ones_pos[k - 1]

    def test_directory_overhead_within_target(self):
        bv = BitVector([1, 0] * (10**5))
        assert bv.directory_overhead() <= 0.25

    def test_empty_and_tiny(self):
        bv = BitVector([])
        assert len(bv) == 0 and bv.ones == 0
        assert bv.select(1, 1) is None
        one = BitVector([1])
        assert one.rank(1, 0) == 1 and one.select(1, 1) == 1

    def test_word_roundtrip(self):
        rng = random.Random(4)
        bits = [rng.randrange(2) for _ in range(777)]
        bv = BitVector(bits)
        bv2 = BitVector.from_words(bv.words.copy(), bv.length)
        assert np.array_equal(bv.to_array(), bv2.to_array())
        assert bv2.rank(1, 776) == bv.rank(1, 776)


class TestLargeAlphabetSequence:
    def test_access_examples(self):
        seq = LargeAlphabetSequence([2, 3, 3, 1])
        assert seq.access(1) == 2
        assert seq.access(4) == 1
        with pytest.raises(IndexError):
            seq.access(5)

    def test_rank_examples(self):
        seq = LargeAlphabetSequence([2, 3, 3, 1])
        assert seq.rank(3, 0) == 0  # empty prefix is legal
        assert seq.rank(3, 3) == 2
        assert seq.rank(7, 4) == 0  # absent symbol
        with pytest.raises(IndexError):
            seq.rank(3, 5)

    def test_select_examples(self):
        seq = LargeAlphabetSequence([2, 3, 3, 1])
        assert seq.select(3, 1) == 2
        assert seq.select(3, 2) == 3
        assert seq.select(3, 3) is None

    def test_against_linear_scan(self):
        rng = random.Random(7)
        n, bound = 10**5, 10**4
        vals = [rng.randrange(1, bound + 1) for _ in range(n)]
        seq = LargeAlphabetSequence(vals, bound=bound)
        # exhaustive grid on a small prefix plus random probes
        for i in range(1, 60):
            assert seq.access(i) == vals[i - 1]
        for _ in range(10**4):
            c = rng.randrange(1, bound + 1)
            i = rng.randrange(0, n + 1)
            assert seq.rank(c, i) == vals[:i].count(c)
        for _ in range(2000):
            c = rng.choice(vals)
            k = rng.randrange(1, vals.count(c) + 1)
            positions = [j + 1 for j, v in enumerate(vals) if v == c]
            assert seq.select(c, k) == positions[k - 1]

    def test_select_enumerates_positions(self):
        rng = random.Random(8)
        vals = [rng.randrange(1, 50) for _ in range(4000)]
        seq = LargeAlphabetSequence(vals)
        for c in range(1, 50):
            got = []
            k = 1
            while True:
                p = seq.select(c, k)
                if p is None:
                    break
                got.append(p)
                k += 1
            assert got == [j + 1 for j, v in enumerate(vals) if v == c]

    def test_rank_select_inversion(self):
        rng = random.Random(2)
        vals = [rng.randrange(1, 30) for _ in range(5000)]
        seq = LargeAlphabetSequence(vals)
        for c in range(1, 30):
            total = seq.count(c)
            for k in range(1, total + 1, 3):
                assert seq.rank(c, seq.select(c, k)) == k

    def test_repeated_queries_stable(self):
        seq = LargeAlphabetSequence([5, 1, 5, 2])
        assert [seq.rank(5, 4) for _ in range(3)] == [2, 2, 2]
        assert [seq.select(5, 2) for _ in range(3)] == [3, 3, 3]

    def test_size_report(self, capsys):
        # soft bound: a small constant of n * lg(bound) bits; reported only
        rng = random.Random(11)
        n, bound = 10**5, 10**4
        seq = LargeAlphabetSequence([rng.randrange(1, bound + 1) for _ in range(n)],
                                    bound=bound)
        target = n * max(bound.bit_length(), 1)
        actual = (seq.values.nbytes + seq._pos.nbytes + seq._starts.nbytes) * 8
        with capsys.disabled():
            print(f"\n  [REPORT] sequence bits: {actual} "
                  f"(target n*lg(bound) = {target}, x{actual / target:.1f})")
        assert actual > 0
