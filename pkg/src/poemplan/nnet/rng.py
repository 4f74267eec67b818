"""Deterministic pseudo-random stream used for all randomness in the package.

The generator is splitmix64 used in counter mode: output i is obtained by
hashing ``seed + (i+1) * GOLDEN`` with the splitmix64 finalizer.  The stream
therefore depends only on the 64-bit seed and the draw index, which makes it
bit-identical across platforms and lets blocks of draws be produced with
vectorised uint64 numpy arithmetic (which wraps mod 2**64).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# 53-bit mantissa: u >> 11 scaled into [0, 1)
_INV_2_53 = 2.0 ** -53


def _splitmix64(states: np.ndarray) -> np.ndarray:
    z = states.astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded splitmix64 stream with a draw counter."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def next_block(self, n: int) -> np.ndarray:
        """Next n raw uint64 draws."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        states = np.uint64(self.seed) + idx * _GOLDEN
        return _splitmix64(states)

    def next_u64(self) -> int:
        return int(self.next_block(1)[0])

    def floats(self, n: int) -> np.ndarray:
        """n float64 draws uniform in [0, 1)."""
        return (self.next_block(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def randint(self, n: int) -> int:
        """Draw in [0, n). Modulo map; the tiny bias is irrelevant here."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]


def init_uniform(rng: Rng, shape, low: float, high: float, dtype=np.float64) -> np.ndarray:
    """Tensor of i.i.d. uniform draws in [low, high), filled in row-major order."""
    if not low < high:
        raise ValueError(f"init_uniform needs low < high, got [{low}, {high})")
    size = int(np.prod(shape)) if shape else 1
    data = low + (high - low) * rng.floats(size)
    return data.reshape(shape).astype(dtype)
