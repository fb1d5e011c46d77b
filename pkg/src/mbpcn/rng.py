"""SplitMix64 pseudo-random stream.

Used for every seeded quantity in the package (random initial data, perturbed
time meshes) so results are bit-reproducible independent of numpy's generator
implementation.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Stateful SplitMix64 generator.

    ``next_uint64`` is the scalar reference; ``uint64`` produces the same
    sequence vectorized with numpy's wrapping uint64 arithmetic.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_uint64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uint64(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + np.uint64(_GAMMA) * k
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK
        return z

    def random(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1) from the top 53 bits."""
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def symmetric(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [-1, 1)."""
        return 2.0 * self.random(n) - 1.0
