"""Reproducible random streams built on the Philox4x64 counter-based generator.

Every sampled tree owns one stream keyed by ``(seed, index)``; the 128-bit
Philox key is ``seed + 2**64 * index``. Streams never share state, so the
output of a batch does not depend on how the batch is split across workers.

A stream is just a Philox state. Building a numpy generator costs far more
than drawing a few numbers from it, so each thread keeps one generator and
streams load their state into it whenever they need fresh numbers.
"""

from __future__ import annotations

import threading
from bisect import bisect_right

import numpy as np

_MASK64 = (1 << 64) - 1
_BLOCK = 256
_FIRST_BLOCK = 16

_local = threading.local()


def _shared() -> np.random.Generator:
    gen = getattr(_local, "gen", None)
    if gen is None:
        gen = _local.gen = np.random.Generator(np.random.Philox(key=0))
    return gen


class RngStream:
    """A single Philox stream with buffered uniforms.

    Uniforms are fetched in blocks; as long as only :meth:`random` and the
    helpers built on it are used, the values equal those of a fresh
    ``Generator(Philox(key))`` called in sequence.
    """

    __slots__ = ("seed", "index", "_state", "_buf", "_pos")

    def __init__(self, seed: int, index: int = 0):
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0 <= index <= _MASK64:
            raise ValueError("stream index must be an unsigned 64-bit integer")
        self.seed = seed
        self.index = index
        self._state = None
        self._buf: list[float] = []
        self._pos = 0

    def _initial_state(self) -> dict:
        return {
            "bit_generator": "Philox",
            "state": {
                "counter": np.zeros(4, dtype=np.uint64),
                "key": np.array([self.seed, self.index], dtype=np.uint64),
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }

    def _enter(self) -> np.random.Generator:
        gen = _shared()
        gen.bit_generator.state = self._state or self._initial_state()
        return gen

    def _leave(self, gen: np.random.Generator) -> None:
        self._state = gen.bit_generator.state

    def spawn(self, index: int) -> "RngStream":
        """Independent child stream, keyed off this stream's identity."""
        ss = np.random.SeedSequence(entropy=[self.seed, self.index], spawn_key=(index,))
        lo, hi = (int(v) for v in ss.generate_state(2, np.uint64))
        return RngStream(lo, hi)

    def random(self) -> float:
        """Uniform on [0, 1)."""
        if self._pos >= len(self._buf):
            gen = self._enter()
            # short first block: most trees need only a few uniforms
            self._buf = gen.random(_BLOCK if self._buf else _FIRST_BLOCK).tolist()
            self._leave(gen)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def below(self, n: int) -> int:
        """Uniform integer in ``0..n-1``."""
        j = int(self.random() * n)
        return j if j < n else n - 1

    def choose(self, cumulative: list[float]) -> int:
        """Index drawn by inversion from a nondecreasing cumulative list."""
        j = bisect_right(cumulative, self.random() * cumulative[-1])
        return j if j < len(cumulative) else len(cumulative) - 1

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def poisson(self, lam: float) -> int:
        if lam == 0:
            return 0
        gen = self._enter()
        out = int(gen.poisson(lam))
        self._leave(gen)
        return out
