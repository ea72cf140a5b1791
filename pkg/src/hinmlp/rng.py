"""Deterministic, purpose-tagged random streams.

Every stochastic component draws from its own stream keyed by
(seed, tag, counter) so that runs replay bit-identically and components
never consume each other's randomness.
"""

from __future__ import annotations

import hashlib

import numpy as np

_TAGS = ("init", "sample", "dropout", "synth")


def _tag_key(tag: str) -> int:
    # stable across processes, unlike hash()
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A replayable random stream.

    Identical (seed, tag, counter) always yields the identical generator
    state, so any draw can be reproduced by rewinding the counter.
    """

    def __init__(self, seed: int, tag: str, counter: int = 0):
        self.seed = int(seed)
        self.tag = tag
        self.counter = int(counter)

    def generator(self) -> np.random.Generator:
        """Generator for the current counter value (does not advance)."""
        ss = np.random.SeedSequence([self.seed, _tag_key(self.tag), self.counter])
        return np.random.Generator(np.random.Philox(ss))

    def next_generator(self) -> np.random.Generator:
        """Generator for the current counter, then advance the counter."""
        g = self.generator()
        self.counter += 1
        return g

    def child(self, tag: str) -> "RngStream":
        """Derived stream sharing the seed but with its own tag."""
        return RngStream(self.seed, f"{self.tag}/{tag}", 0)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, tag={self.tag!r}, counter={self.counter})"
