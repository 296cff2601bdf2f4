"""Counter-based random streams keyed by (master seed, replica).

Each replica gets a Philox generator whose 128-bit key is the pair
``(stream_key, replica)``; the Philox counter then plays the role of the
draw index.  Distinct replicas therefore never share keys, and the key of a
replica does not depend on how many replicas exist or in which order they
run.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

_MASK64 = (1 << 64) - 1


def _purpose_key(seed: int, purpose: str) -> int:
    # mix the purpose tag into the seed so independent experiments sharing a
    # master seed do not reuse streams
    if purpose == "":
        return seed
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(purpose.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Streams:
    """Factory of per-replica generators.

    Parameters
    ----------
    seed : int
        64-bit master seed.
    purpose : str, optional
        Tag separating independent uses of the same master seed.
    """

    seed: int
    purpose: str = ""

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned value, got {self.seed}")

    @cached_property
    def key(self) -> int:
        return _purpose_key(int(self.seed), self.purpose)

    def stream(self, replica: int) -> np.random.Generator:
        if replica < 0:
            raise ValueError("replica index must be nonnegative")
        key = np.array([self.key, replica], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, purpose: str) -> "Streams":
        """Streams for a sub-experiment, independent of the parent's."""
        tag = purpose if not self.purpose else f"{self.purpose}/{purpose}"
        return Streams(int(self.seed), tag)


def as_streams(rng, purpose: str = "") -> Streams:
    """Accept a Streams object or an integer seed."""
    if isinstance(rng, Streams):
        return rng.child(purpose) if purpose else rng
    return Streams(int(rng), purpose)
