"""Seeded, reproducible random streams for the simulator

Uniforms come from JAX's counter-based threefry2x32 generator. A stream with a
64-bit ``seed`` uses the raw key ``(seed >> 32, seed & 0xffffffff)`` and produces
its ``i``-th block of ``block_size`` uniforms as
``jax.random.uniform(jax.random.fold_in(key, i), (block_size,), float64)``. Both
threefry and ``fold_in`` are fully specified, so a seed gives the same sequence
on every platform. Replication ``r`` of a run seeded with ``seed`` uses the seed
``seed ^ splitmix64(r)``.
"""

__all__ = ["RandomStream", "key_from_seed", "replication_seed", "splitmix64"]

import math
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """The SplitMix64 output function applied to ``x + golden gamma`` (64-bit)"""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _seed64(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"Seeds must be integers; got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"Seeds must fit in 64 unsigned bits; got {seed}")
    return seed


def replication_seed(seed: int, replication: int) -> int:
    """Seed of replication number ``replication`` of a run seeded with ``seed``"""
    if replication < 0:
        raise ValueError("Replication indices must be non-negative")
    return _seed64(seed) ^ splitmix64(replication)


def key_from_seed(seed: int) -> jax.Array:
    """The raw threefry key for a 64-bit seed"""
    seed = _seed64(seed)
    return jnp.array([seed >> 32, seed & 0xFFFFFFFF], dtype=jnp.uint32)


@partial(jax.jit, static_argnames=("size",))
def _uniform_block(key: jax.Array, index: int, *, size: int) -> jax.Array:
    return jax.random.uniform(
        jax.random.fold_in(key, index), (size,), dtype=jnp.float64
    )


class RandomStream:
    """A single-owner stream of uniforms on ``[0, 1)``

    Draws are served from pre-generated blocks, so consuming one value at a time
    from a Python event loop is cheap. Two streams with the same seed and block
    size yield identical sequences.

    Args:
        seed: Unsigned 64-bit seed
        block_size: Number of uniforms generated per block
    """

    def __init__(self, seed: int, *, block_size: int = 1 << 16):
        if block_size < 1:
            raise ValueError("'block_size' must be positive")
        self.seed = _seed64(seed)
        self.block_size = int(block_size)
        self._key = key_from_seed(self.seed)
        self._block_index = 0
        self._buffer: list[float] = []
        self._position = 0
        self.drawn = 0

    def _refill(self) -> None:
        block = _uniform_block(self._key, self._block_index, size=self.block_size)
        self._buffer = np.asarray(block).tolist()
        self._block_index += 1
        self._position = 0

    def uniform(self) -> float:
        """The next uniform variate"""
        if self._position == len(self._buffer):
            self._refill()
        u = self._buffer[self._position]
        self._position += 1
        self.drawn += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        """The next ``n`` uniform variates, in stream order"""
        n = int(n)
        out = np.empty(n)
        filled = 0
        while filled < n:
            if self._position == len(self._buffer):
                self._refill()
            take = min(n - filled, len(self._buffer) - self._position)
            out[filled : filled + take] = self._buffer[
                self._position : self._position + take
            ]
            self._position += take
            filled += take
        self.drawn += n
        return out

    def exponential(self, rate: float) -> float:
        """An exponential variate with the given rate, by inversion"""
        return -math.log1p(-self.uniform()) / rate
