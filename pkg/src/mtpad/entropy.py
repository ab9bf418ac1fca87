"""Random-bit sources.

Everything in the package draws randomness through ``getrandbits(n)``, the
interface shared by :class:`random.Random` (seeded, reproducible) and
:class:`secrets.SystemRandom` (OS entropy). :class:`FixedSource` replays a
finite byte string and is meant for plumbing tests.
"""

from __future__ import annotations

import random
import secrets
from typing import Protocol


class EntropyExhausted(RuntimeError):
    pass


class RandomBitSource(Protocol):
    def getrandbits(self, k: int) -> int: ...


class FixedSource:
    """Serves the bits of ``data`` MSB-first, then raises :class:`EntropyExhausted`."""

    def __init__(self, data: bytes):
        self._value = int.from_bytes(data, "big")
        self._remaining = 8 * len(data)

    @property
    def remaining(self) -> int:
        return self._remaining

    def getrandbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        if k > self._remaining:
            raise EntropyExhausted(
                f"requested {k} bits, only {self._remaining} left in fixed source"
            )
        self._remaining -= k
        out = self._value >> self._remaining
        self._value &= (1 << self._remaining) - 1
        return out


def seeded(seed: int) -> random.Random:
    return random.Random(seed)


def system() -> secrets.SystemRandom:
    return secrets.SystemRandom()


def randbelow(source: RandomBitSource, n: int) -> int:
    """Uniform integer in ``[0, n)`` by rejection sampling on ``getrandbits``."""
    if n <= 0:
        raise ValueError(f"empty range [0, {n})")
    k = (n - 1).bit_length()
    while True:
        r = source.getrandbits(k) if k else 0
        if r < n:
            return r
