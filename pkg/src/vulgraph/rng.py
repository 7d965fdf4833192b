"""Deterministic pseudo-random numbers.

A small splitmix64 generator backs every stochastic choice in the package
(weight init, corpus shuffles, synthetic program generation) so that results
are bit-identical across platforms and processes for a given seed. Floats are
built from the top 53 bits of the raw stream, the portable construction.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Rng:
    """Seedable splitmix64 stream with the handful of draws we need."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def _next(self) -> int:
        self._state, out = _splitmix64(self._state)
        return out

    def fork(self, tag: str) -> "Rng":
        """Derive an independent named substream.

        Mixing a stable string hash into the next raw draw gives substreams
        that do not collide for distinct tags and do not disturb the parent
        beyond one draw.
        """
        h = 0xCBF29CE484222325
        for b in tag.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _MASK
        return Rng(self._next() ^ h)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self._next() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] inclusive, via rejection sampling."""
        if high < low:
            raise ValueError("empty range")
        span = high - low + 1
        # rejection keeps the draw exactly uniform
        limit = (_MASK + 1) - ((_MASK + 1) % span)
        while True:
            v = self._next()
            if v < limit:
                return low + (v % span)

    def choice(self, seq):
        if not seq:
            raise ValueError("empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq, k: int) -> list:
        """k distinct elements, order randomized."""
        if k > len(seq):
            raise ValueError("sample larger than population")
        pool = list(seq)
        self.shuffle(pool)
        return pool[:k]

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Normal draw via Box-Muller (rejection-free form)."""
        u1 = 1.0 - self.random()  # avoid log(0)
        u2 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z
