"""Inter-arrival gap laws for the two sources

Each source emits packets as a renewal process with i.i.d. gaps. The relay
analysis only needs the long-term renewal rate ``lambda' = 1 / E[gap]``, which
also equals ``lim_{s -> 0} s psi(s) / (1 - psi(s))`` where ``psi`` is the
Laplace transform of the gap density; :func:`rate_limit_check` evaluates that
limit numerically as an independent check of the closed form.
"""

__all__ = [
    "ArrivalModel",
    "Deterministic",
    "Erlang",
    "Exponential",
    "NumericalBreakdownError",
    "Uniform",
    "arrival_model_from_dict",
    "laplace_complement",
    "laplace_psi",
    "laplace_psi_quadrature",
    "long_term_rate",
    "rate_limit_check",
    "sample_gap",
    "sample_gaps",
]

import logging
import math
import operator
from collections.abc import Mapping, Sequence
from typing import Any, Callable, Optional

import equinox as eqx
import numpy as np
from scipy import integrate, stats

from encrelay import units
from encrelay.proto import ArrivalModel
from encrelay.streams import RandomStream
from encrelay.types import Quantity
from encrelay.units import unit_registry as ureg

logger = logging.getLogger(__name__)

TAIL_MASS = 1e-12
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12


class NumericalBreakdownError(ArithmeticError):
    """Raised when ``1 - psi(s)`` can no longer be resolved in double precision"""


def _positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"'{name}' must be positive and finite; got {value!r}")
    return value


class Exponential(eqx.Module):
    """Exponential gaps, i.e. Poisson arrivals

    Args:
        rate (Quantity): Arrival rate [1/s]
    """

    rate: float

    @units.quantity_input(rate=ureg.Hz)
    def __init__(self, rate: Quantity):
        self.rate = _positive(units.magnitude(rate), "rate")

    @property
    def kind(self) -> str:
        return "exponential"

    def mean_gap(self) -> float:
        return 1.0 / self.rate

    def draw(self, stream: RandomStream) -> float:
        return -math.log1p(-stream.uniform()) / self.rate

    def draws(self, stream: RandomStream, n: int) -> np.ndarray:
        return -np.log1p(-stream.uniforms(n)) / self.rate

    def laplace(self, s: float) -> float:
        return self.rate / (self.rate + s)

    def laplace_complement(self, s: float) -> float:
        return s / (self.rate + s)

    def pdf(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.abs(t)), 0.0)

    def support(self) -> tuple[float, float]:
        return 0.0, -math.log(TAIL_MASS) / self.rate

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "rate": self.rate}


class Deterministic(eqx.Module):
    """Periodic arrivals, one packet every ``period``

    Args:
        period (Quantity): Gap between packets [s]
    """

    period: float

    @units.quantity_input(period=ureg.s)
    def __init__(self, period: Quantity):
        self.period = _positive(units.magnitude(period), "period")

    @property
    def kind(self) -> str:
        return "deterministic"

    def mean_gap(self) -> float:
        return self.period

    def draw(self, stream: RandomStream) -> float:
        return self.period

    def draws(self, stream: RandomStream, n: int) -> np.ndarray:
        return np.full(int(n), self.period)

    def laplace(self, s: float) -> float:
        return math.exp(-s * self.period)

    def laplace_complement(self, s: float) -> float:
        return -math.expm1(-s * self.period)

    def pdf(self, t: np.ndarray) -> None:
        return None

    def support(self) -> tuple[float, float]:
        return self.period, self.period

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "period": self.period}


class Uniform(eqx.Module):
    """Gaps uniform on ``[low, high]``

    The transform of this law is evaluated by quadrature.

    Args:
        low (Quantity): Shortest gap [s], non-negative
        high (Quantity): Longest gap [s], greater than ``low``
    """

    low: float
    high: float

    @units.quantity_input(low=ureg.s, high=ureg.s)
    def __init__(self, low: Quantity, high: Quantity):
        low = units.magnitude(low)
        high = units.magnitude(high)
        if not (low >= 0 and math.isfinite(low)):
            raise ValueError(f"'low' must be non-negative and finite; got {low!r}")
        if not (high > low and math.isfinite(high)):
            raise ValueError(
                f"'high' must be finite and greater than 'low'; got {high!r}"
            )
        self.low = low
        self.high = high

    @property
    def kind(self) -> str:
        return "uniform"

    def mean_gap(self) -> float:
        return 0.5 * (self.low + self.high)

    def draw(self, stream: RandomStream) -> float:
        return self.low + (self.high - self.low) * stream.uniform()

    def draws(self, stream: RandomStream, n: int) -> np.ndarray:
        return self.low + (self.high - self.low) * stream.uniforms(n)

    def laplace(self, s: float) -> float:
        return _quadrature(self, lambda t: math.exp(-s * t))

    def laplace_complement(self, s: float) -> float:
        # purely relative tolerance: the value itself is O(s)
        value, error = _quadrature(
            self, lambda t: -math.expm1(-s * t), epsabs=0.0, full=True
        )
        if not error <= 1e-9 * value:
            raise NumericalBreakdownError(
                f"1 - psi(s) = {value!r} at s={s!r} is below the quadrature "
                "resolution"
            )
        return value

    def pdf(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = (t >= self.low) & (t <= self.high)
        return np.where(inside, 1.0 / (self.high - self.low), 0.0)

    def support(self) -> tuple[float, float]:
        return self.low, self.high

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "low": self.low, "high": self.high}


class Erlang(eqx.Module):
    """Erlang gaps: the sum of ``shape`` exponential stages

    Args:
        shape (int): Number of stages, at least 1
        rate (Quantity): Rate of each stage [1/s]; the mean gap is
            ``shape / rate``
    """

    shape: int = eqx.field(static=True)
    rate: float

    @units.quantity_input(rate=ureg.Hz)
    def __init__(self, shape: int, rate: Quantity):
        if isinstance(shape, bool):
            raise ValueError("The Erlang 'shape' must be an integer")
        try:
            shape = operator.index(shape)
        except TypeError:
            raise ValueError(
                f"The Erlang 'shape' must be an integer; got {shape!r}"
            ) from None
        if shape < 1:
            raise ValueError(f"The Erlang 'shape' must be at least 1; got {shape}")
        self.shape = shape
        self.rate = _positive(units.magnitude(rate), "rate")

    @property
    def kind(self) -> str:
        return "erlang"

    def mean_gap(self) -> float:
        return self.shape / self.rate

    def draw(self, stream: RandomStream) -> float:
        total = 0.0
        for _ in range(self.shape):
            total -= math.log1p(-stream.uniform())
        return total / self.rate

    def draws(self, stream: RandomStream, n: int) -> np.ndarray:
        u = stream.uniforms(int(n) * self.shape).reshape(int(n), self.shape)
        return -np.log1p(-u).sum(axis=1) / self.rate

    def laplace(self, s: float) -> float:
        return (self.rate / (self.rate + s)) ** self.shape

    def laplace_complement(self, s: float) -> float:
        return -math.expm1(self.shape * math.log1p(-s / (self.rate + s)))

    def pdf(self, t: np.ndarray) -> np.ndarray:
        return stats.gamma.pdf(t, self.shape, scale=1.0 / self.rate)

    def support(self) -> tuple[float, float]:
        upper = stats.gamma.isf(TAIL_MASS, self.shape, scale=1.0 / self.rate)
        return 0.0, float(upper)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "shape": self.shape, "rate": self.rate}


_KINDS: dict[str, tuple[type, tuple[str, ...]]] = {
    "exponential": (Exponential, ("rate",)),
    "deterministic": (Deterministic, ("period",)),
    "uniform": (Uniform, ("low", "high")),
    "erlang": (Erlang, ("shape", "rate")),
}


def arrival_model_from_dict(data: Mapping[str, Any]) -> ArrivalModel:
    """Build an arrival model from its JSON form, e.g.
    ``{"kind": "exponential", "rate": 1.0}``

    Raises:
        ValueError: On an unknown kind, a missing or unknown key, or invalid
            parameter values
    """
    if not isinstance(data, Mapping):
        raise ValueError(f"An arrival model must be an object; got {data!r}")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ValueError(
            f"Unknown arrival kind {kind!r}; expected one of {sorted(_KINDS)}"
        )
    cls, names = _KINDS[kind]
    unknown = sorted(set(data) - {"kind", *names})
    if unknown:
        raise ValueError(f"Unknown keys for a {kind} arrival model: {unknown}")
    missing = [name for name in names if name not in data]
    if missing:
        raise ValueError(f"Missing keys for a {kind} arrival model: {missing}")
    for name in names:
        value = data[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"'{name}' must be a number; got {value!r}")
    return cls(**{name: data[name] for name in names})


def sample_gap(model: ArrivalModel, rng: RandomStream) -> float:
    """Draw one gap [s] from ``rng``"""
    return model.draw(rng)


def sample_gaps(model: ArrivalModel, rng: RandomStream, n: int) -> np.ndarray:
    """Draw ``n`` gaps [s] from ``rng``, consuming the same uniforms that ``n``
    calls to :func:`sample_gap` would"""
    if n < 0:
        raise ValueError("'n' must be non-negative")
    return model.draws(rng, n)


def long_term_rate(model: ArrivalModel) -> float:
    """The long-term renewal rate ``1 / E[gap]`` [1/s]"""
    return 1.0 / model.mean_gap()


def _check_s(s: Any) -> float:
    s = float(s)
    if not (s > 0 and math.isfinite(s)):
        raise ValueError(f"The transform variable 's' must be positive; got {s!r}")
    return s


def laplace_psi(model: ArrivalModel, s: float) -> float:
    """The Laplace transform ``psi(s) = E[exp(-s gap)]`` of the gap density"""
    return model.laplace(_check_s(s))


def laplace_complement(model: ArrivalModel, s: float) -> float:
    """``1 - psi(s)``, evaluated without cancellation for small ``s``"""
    return model.laplace_complement(_check_s(s))


def laplace_psi_quadrature(model: ArrivalModel, s: float) -> float:
    """``psi(s)`` by direct quadrature of the density over its truncated support

    Raises:
        ValueError: If the model has no density (deterministic gaps)
    """
    s = _check_s(s)
    if model.pdf(np.zeros(1)) is None:
        raise ValueError(f"A {model.kind} gap law has no density to integrate")
    return _quadrature(model, lambda t: math.exp(-s * t))


def _quadrature(
    model: ArrivalModel,
    kernel: Callable[[float], float],
    *,
    epsabs: float = QUAD_EPSABS,
    full: bool = False,
) -> Any:
    low, high = model.support()

    def integrand(t: float) -> float:
        return float(model.pdf(np.asarray(t))) * kernel(t)

    value, error = integrate.quad(
        integrand, low, high, epsabs=epsabs, epsrel=QUAD_EPSREL, limit=200
    )
    return (value, error) if full else value


def rate_limit_check(
    model: ArrivalModel, s_grid: Optional[Sequence[float]] = None
) -> float:
    """Estimate the renewal rate as ``lim_{s -> 0} s psi(s) / (1 - psi(s))``

    The ratio is evaluated on a strictly decreasing positive grid (by default
    ``1e-2, 1e-3, 1e-4, 1e-5``) and extrapolated to ``s = 0`` with Neville's
    algorithm.

    Raises:
        ValueError: If the grid is not strictly decreasing and positive
        NumericalBreakdownError: If ``1 - psi(s)`` is not resolvable at some
            grid point
    """
    if s_grid is None:
        s_grid = (1e-2, 1e-3, 1e-4, 1e-5)
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 1:
        raise ValueError("'s_grid' must be a non-empty vector")
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise ValueError("'s_grid' must contain positive, finite values")
    if np.any(np.diff(s) >= 0):
        raise ValueError("'s_grid' must be strictly decreasing")

    ratios = []
    for value in s:
        complement = model.laplace_complement(float(value))
        if not (complement > 0 and math.isfinite(complement)):
            raise NumericalBreakdownError(
                f"1 - psi(s) underflowed at s={value!r} for a {model.kind} model"
            )
        psi = 1.0 - complement
        ratios.append(value * psi / complement)
    estimate = _neville_at_zero(s, np.asarray(ratios))
    logger.debug(
        "Renewal-rate limit for %s: %r (closed form %r)",
        model.kind,
        estimate,
        long_term_rate(model),
    )
    return estimate


def _neville_at_zero(x: np.ndarray, y: np.ndarray) -> float:
    p = [float(v) for v in y]
    n = len(p)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return p[0]
