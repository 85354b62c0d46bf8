"""Seeded randomness with independent labelled sub-streams.

Each consumer asks for its own stream by label; a stream's seed is derived by
hashing the root seed with the label, so adding a new consumer never shifts
the draws of an existing one.
"""

from __future__ import annotations

import random

from .encoding import H


class SeededRandomness:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, random.Random] = {}

    def stream(self, label: str) -> random.Random:
        if label not in self._streams:
            derived = int.from_bytes(H("proverum-rng", self.seed, label), "big")
            self._streams[label] = random.Random(derived)
        return self._streams[label]

    def randbytes(self, label: str, n: int = 32) -> bytes:
        return self.stream(label).randbytes(n)
