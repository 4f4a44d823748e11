"""
Seeded random number state.

All randomness in the toolkit (weight init, dropout masks, batch shuffling,
synthetic data) flows through RngState so that an identical seed reproduces
an identical draw sequence. The generator is numpy's PCG64 bit generator.
"""

from typing import Tuple, Union

import numpy as np

from errors import ParameterError

ALGORITHM = "PCG64"
_U64 = 2 ** 64
# Odd multiplier used to derive child streams from a parent seed.
_STREAM_MULTIPLIER = 0x9E3779B97F4A7C15


class RngState:
    """Pseudorandom generator bound to a 64-bit unsigned seed."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) < _U64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.algorithm = ALGORITHM
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, stream: int) -> "RngState":
        """Fresh state for an independent stream derived from this seed."""
        derived = (self.seed * _STREAM_MULTIPLIER + int(stream) + 1) % _U64
        return RngState(derived)

    def random(self, shape: Union[int, Tuple[int, ...]], dtype=np.float64) -> np.ndarray:
        return self._generator.random(shape, dtype=dtype)

    def normal(self, loc: float, scale: float, shape=None) -> np.ndarray:
        return self._generator.normal(loc, scale, shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        """Scalar draw when ``shape`` is None, array otherwise."""
        return self._generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._generator.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, algorithm={self.algorithm})"
