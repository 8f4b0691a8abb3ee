"""Seedable, splittable random streams.

Every stochastic routine takes an explicit :class:`RngStream`. Child streams
are derived from the parent's seed and a tuple key, so the stream handed to
bootstrap replicate ``b`` or Monte Carlo trial ``t`` depends only on the
master seed and the index, never on scheduling order.
"""

from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20190401

_MASK64 = (1 << 64) - 1


class RngStream:
    """A numpy ``Generator`` bound to ``(seed, key)``.

    Parameters
    ----------
    seed : int
        Master seed; reduced modulo 2**64 so negative values are accepted.
    key : tuple of int
        Path from the master stream. ``RngStream(s).child(3, 1)`` is the same
        stream as ``RngStream(s, (3, 1))``.
    """

    __slots__ = ("seed", "key", "gen")

    def __init__(self, seed: int = DEFAULT_SEED, key: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(index))

    def standard_normal(self, size) -> np.ndarray:
        return self.gen.standard_normal(size)

    def integers(self, low, high, size=None):
        return self.gen.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key})"


def as_stream(rng: "RngStream | int | None") -> RngStream:
    if rng is None:
        return RngStream()
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))
