"""Buffer overflow of conventional network coding with an unbounded buffer

Without ENC the signed backlog ``R`` after ``Q`` arrivals is a walk of ``Q``
equiprobable ``+1``/``-1`` steps (``sigma_B = 1``), so ``|R|`` grows like
``sqrt(Q)`` and ``Pr(|R| > K) ~ 2 Phi(-K / (sqrt(Q) sigma_B))``.
"""

__all__ = ["overflow_experiment", "overflow_probability", "random_walk_endpoints"]

import logging
import math
import operator
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.stats import norm

from encrelay.streams import key_from_seed

logger = logging.getLogger(__name__)

CHUNK_TRIALS = 8192


def _count(value: int, name: str, minimum: int) -> int:
    if isinstance(value, bool):
        raise ValueError(f"'{name}' must be an integer")
    try:
        value = operator.index(value)
    except TypeError:
        raise ValueError(f"'{name}' must be an integer; got {value!r}") from None
    if value < minimum:
        raise ValueError(f"'{name}' must be at least {minimum}; got {value}")
    return value


@partial(jax.jit, static_argnames=("trials", "steps"))
def _endpoints(key: jax.Array, *, trials: int, steps: int) -> jax.Array:
    # one random bit per step, packed 32 to a word
    words = -(-steps // 32)
    bits = jax.random.bits(key, (trials, words), dtype=jnp.uint32)
    spare = 32 * words - steps
    mask = jnp.uint32(0xFFFFFFFF >> spare)
    bits = bits.at[:, -1].set(bits[:, -1] & mask)
    ones = jnp.sum(jax.lax.population_count(bits).astype(jnp.int64), axis=1)
    return 2 * ones - steps


def random_walk_endpoints(q_total: int, trials: int, seed: int) -> np.ndarray:
    """Endpoints of ``trials`` independent walks of ``q_total`` +1/-1 steps

    Walks are generated in chunks of ``CHUNK_TRIALS``; chunk ``i`` uses the key
    ``fold_in(key(seed), i)``.
    """
    q_total = _count(q_total, "q_total", 1)
    trials = _count(trials, "trials", 1)
    key = key_from_seed(seed)
    chunks = []
    for i, start in enumerate(range(0, trials, CHUNK_TRIALS)):
        size = min(CHUNK_TRIALS, trials - start)
        chunk_key = jax.random.fold_in(key, i)
        chunks.append(np.asarray(_endpoints(chunk_key, trials=size, steps=q_total)))
    return np.concatenate(chunks)


def overflow_experiment(q_total: int, K: int, trials: int, seed: int) -> float:
    """The fraction of walks of ``q_total`` steps that end with ``|R| > K``

    Raises:
        ValueError: If ``q_total < 100``, ``trials < 1000`` or ``K < 0``
    """
    q_total = _count(q_total, "q_total", 100)
    K = _count(K, "K", 0)
    trials = _count(trials, "trials", 1000)
    endpoints = random_walk_endpoints(q_total, trials, seed)
    probability = float(np.mean(np.abs(endpoints) > K))
    logger.info(
        "Overflow of K=%d after %d arrivals: %.6g over %d trials (normal %.6g)",
        K,
        q_total,
        probability,
        trials,
        overflow_probability(q_total, K),
    )
    return probability


def overflow_probability(q_total: int, K: float, sigma_b: float = 1.0) -> float:
    """The normal approximation ``2 Phi(-K / (sqrt(q_total) sigma_b))``"""
    if not q_total > 0:
        raise ValueError(f"'q_total' must be positive; got {q_total!r}")
    if not K >= 0:
        raise ValueError(f"'K' must be non-negative; got {K!r}")
    if not sigma_b > 0:
        raise ValueError(f"'sigma_b' must be positive; got {sigma_b!r}")
    z = K / (math.sqrt(q_total) * sigma_b)
    return float(2 * norm.cdf(-z))
