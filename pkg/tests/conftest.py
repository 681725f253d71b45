"""Shared fixture-text generators for the test suite."""

from __future__ import annotations

import random

import pytest


def random_text(rng: random.Random, size: int, alphabet: bytes = b"") -> bytes:
    if not alphabet:
        return rng.randbytes(size)
    return bytes(rng.choice(alphabet) for _ in range(size))


def periodic_text(rng: random.Random, size: int) -> bytes:
    unit = random_text(rng, rng.randrange(1, 6), b"ab")
    reps = size // max(len(unit), 1) + 1
    return (unit * reps)[:size]


def fibonacci_text(size: int) -> bytes:
    a, b = b"b", b"a"
    while len(b) < size:
        a, b = b, b + a
    return b[:size]


def near_duplicates(rng: random.Random, size: int, copies: int = 4,
                    mutation_rate: float = 0.002) -> bytes:
    seed_len = max(size // copies, 1)
    seed = rng.randbytes(seed_len)
    parts = []
    for _ in range(copies):
        buf = bytearray(seed)
        for _ in range(int(len(buf) * mutation_rate)):
            buf[rng.randrange(len(buf))] = rng.randrange(256)
        parts.append(bytes(buf))
    return b"".join(parts)[:size]


def text_family(rng: random.Random, kind: int, size: int) -> bytes:
    kind = kind % 6
    if kind == 0:
        return random_text(rng, size)
    if kind == 1:
        return random_text(rng, size, b"acgt")
    if kind == 2:
        return b"a" * size
    if kind == 3:
        return periodic_text(rng, size)
    if kind == 4:
        return fibonacci_text(size)
    return near_duplicates(rng, size)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xE5B)
