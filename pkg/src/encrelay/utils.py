__all__ = ["ANALYTIC_ATOL", "INPUT_ATOL", "as_vector", "clip_to_box"]

import jax.numpy as jnp
import numpy as np

from encrelay.types import Array

# Analytic identities (balance, normalization, round trips) are held to this
ANALYTIC_ATOL = 1e-12

# Constraint-box membership of user inputs is checked with this slack, and
# accepted values are then clipped onto the box
INPUT_ATOL = 1e-9


def as_vector(value: Array, *, name: str, length: int) -> Array:
    """Convert ``value`` to a 1D float64 array of the given length

    Raises:
        ValueError: If the input has the wrong shape or non-finite entries
    """
    vec = jnp.asarray(value, dtype=jnp.float64)
    if vec.ndim != 1 or vec.shape[0] != length:
        raise ValueError(
            f"'{name}' must be a vector of length {length}; "
            f"got shape {tuple(vec.shape)}"
        )
    if not bool(jnp.all(jnp.isfinite(vec))):
        raise ValueError(f"'{name}' must only contain finite values")
    return vec


def clip_to_box(
    value: Array, lower: Array, upper: Array, *, name: str, atol: float = INPUT_ATOL
) -> Array:
    """Check that ``lower <= value <= upper`` up to ``atol`` and clip onto the box

    ``lower`` and ``upper`` broadcast against ``value``; ``upper`` may be
    ``inf``.
    """
    value = jnp.asarray(value)
    lower = jnp.broadcast_to(jnp.asarray(lower, dtype=value.dtype), value.shape)
    upper = jnp.broadcast_to(jnp.asarray(upper, dtype=value.dtype), value.shape)
    bad = np.flatnonzero(
        np.asarray((value < lower - atol) | (value > upper + atol))
    ).tolist()
    if bad:
        idx = bad[0]
        raise ValueError(
            f"'{name}[{idx}]' = {float(value[idx])!r} is outside "
            f"[{float(lower[idx])!r}, {float(upper[idx])!r}]"
        )
    return jnp.clip(value, lower, upper)
