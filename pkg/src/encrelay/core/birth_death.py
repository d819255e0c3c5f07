"""Kernels for finite birth-death chains on the states ``0, 1, ..., K``

The chain moves up from state ``k`` at rate ``up[k]`` and down from state
``k`` at rate ``down[k - 1]``, so ``up`` has ``K + 1`` entries (the last one is
the rate of an attempted move out of the top state, which never changes the
state) and ``down`` has ``K`` entries. These functions work on plain arrays;
the validated interface lives in :mod:`encrelay.model`.
"""

__all__ = ["generator_matrix", "product_form", "balance_solve"]

import jax
import jax.numpy as jnp

from encrelay.types import Array


@jax.jit
def product_form(up: Array, down: Array) -> Array:
    """Stationary distribution from the product-form solution

    ``pi[k] = pi[0] * prod_{m<k} up[m] / down[m]``. A zero upward rate zeroes
    every state above it exactly, whatever the downstream rates are.

    Args:
        up: Upward rates, shape ``(K + 1,)``
        down: Strictly positive downward rates, shape ``(K,)``

    Returns:
        The stationary probabilities, shape ``(K + 1,)``
    """
    ratios = up[:-1] / down
    weights = jnp.concatenate([jnp.ones(1, dtype=ratios.dtype), jnp.cumprod(ratios)])
    return weights / jnp.sum(weights)


@jax.jit
def generator_matrix(up: Array, down: Array) -> Array:
    """The infinitesimal generator ``Q`` of the chain, shape ``(K + 1, K + 1)``"""
    off = jnp.diag(up[:-1], k=1) + jnp.diag(down, k=-1)
    return off - jnp.diag(jnp.sum(off, axis=1))


@jax.jit
def balance_solve(up: Array, down: Array) -> Array:
    """Stationary distribution from a dense solve of the global balance equations

    Solves ``pi Q = 0`` with ``sum(pi) = 1`` by replacing the last balance
    equation with the normalization. This is independent of the product form
    and is used to check it.
    """
    q = generator_matrix(up, down)
    n = q.shape[0]
    a = q.T.at[-1].set(jnp.ones(n, dtype=q.dtype))
    b = jnp.zeros(n, dtype=q.dtype).at[-1].set(1.0)
    return jnp.linalg.solve(a, b)
