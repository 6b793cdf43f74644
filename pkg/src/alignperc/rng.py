"""Deterministic random stream derivation.

Every stochastic routine takes a RandomSource. A source is a pure value
(master seed plus a stream label hash); deriving a child stream mixes tag
values into the label with a splitmix64 chain, so the generator obtained
for a given (master, tags...) path is always the same regardless of how
many other streams were consumed, in what order, or on how many threads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One round of the splitmix64 mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _tag_value(tag) -> int:
    """Map a tag (int or str) to a stable 64-bit value."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    if isinstance(tag, str):
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream tag must be int or str, got {type(tag).__name__}")


@dataclass(frozen=True)
class RandomSource:
    """A derivable, reproducible source of numpy generators.

    Parameters
    ----------
    master : int
        Master seed for the whole experiment.
    stream : int
        Stream label, 0 for the root. Use derive() rather than setting
        this directly.
    """

    master: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master) < (1 << 64):
            raise ValueError("master seed must fit in 64 bits")

    def derive(self, *tags) -> "RandomSource":
        """Return a child source, mixing each tag into the stream label."""
        s = self.stream
        for tag in tags:
            s = splitmix64(s ^ _tag_value(tag))
        return RandomSource(self.master, s)

    def seed_words(self, n: int = 4) -> list[int]:
        """Derive n 64-bit seed words from (master, stream)."""
        x = splitmix64(self.master ^ splitmix64(self.stream))
        words = []
        for _ in range(n):
            x = splitmix64(x)
            words.append(x)
        return words

    def generator(self) -> np.random.Generator:
        """A fresh PCG64 generator seeded purely by (master, stream)."""
        seed = 0
        for w in self.seed_words(4):
            seed = (seed << 64) | w
        return np.random.Generator(np.random.PCG64(seed))
