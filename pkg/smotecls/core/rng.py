# smotecls/core/rng.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream addressed by (seed, stream id).

    Draws come from a Philox generator keyed by a SeedSequence built from
    the seed and the stream path, so the same address always replays the
    same sequence on every platform. `spawn` derives independent sub-streams
    (one per strategy inside a repeat, one per tree inside a forest, ...).
    """

    seed: int
    stream: int = 0
    path: Tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def spawn(self, tag: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.path + (int(tag),))


RngLike = Union[RngStream, np.random.Generator, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def child_seed(gen: np.random.Generator) -> int:
    """Draw a 63-bit seed from a generator (used to key per-task streams)."""
    return int(gen.integers(0, 2**63 - 1))
