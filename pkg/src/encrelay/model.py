"""The Enhanced Network Coding (ENC) policy and its buffer-state Markov chain

The relay between nodes A and B holds at most ``K`` packets, all from the same
direction. Its backlog ``S(t)`` is a birth-death chain on ``0..K``: an arrival
from the queued direction grows the backlog unless the relay sends uncoded
(probability ``g_k``), and an arrival from the other direction or an uncoded
service event (Poisson, rate ``f_k``) shrinks it. This module maps policies to
chain rates and evaluates the closed-form delay, loss and energy.
"""

__all__ = [
    "EncPolicy",
    "Metrics",
    "RateParams",
    "StationaryDist",
    "analyze",
    "energy",
    "loss_rate",
    "mean_backlog",
    "mean_delay",
    "policy_to_rates",
    "rates_to_policy",
    "state_energy_rates",
    "stationary",
]

import math
import operator
from typing import Optional

import equinox as eqx
import jax.numpy as jnp

from encrelay import units
from encrelay.core.birth_death import product_form
from encrelay.types import Array, Quantity
from encrelay.units import unit_registry as ureg
from encrelay.utils import ANALYTIC_ATOL, as_vector, clip_to_box


def _buffer_size(K: int) -> int:
    if isinstance(K, bool):
        raise ValueError("The buffer size 'K' must be an integer")
    try:
        K = operator.index(K)
    except TypeError:
        raise ValueError(
            f"The buffer size 'K' must be an integer; got {K!r}"
        ) from None
    if K < 1:
        raise ValueError(f"The buffer size 'K' must be at least 1; got {K}")
    return K


class EncPolicy(eqx.Module):
    """An ENC policy for a relay with a ``K``-packet buffer

    Args:
        K (int): Buffer capacity in packets, at least 1.
        g (Array): Probabilities ``g_0..g_K`` of sending uncoded when a packet
            arrives and the opposite queue is empty, with ``k`` packets stored.
        f (Array): Rates ``f_0..f_K`` [1/s] of spontaneous uncoded sends in
            state ``k``. ``f_0`` is kept for uniform indexing but never used.
            Defaults to all zeros.

    Entries within ``1e-9`` outside their range are clipped onto it; anything
    further out raises ``ValueError``.
    """

    K: int = eqx.field(static=True)
    g: Array
    f: Array

    def __init__(self, K: int, g: Array, f: Optional[Array] = None):
        self.K = _buffer_size(K)
        n = self.K + 1
        self.g = clip_to_box(as_vector(g, name="g", length=n), 0.0, 1.0, name="g")
        if f is None:
            self.f = jnp.zeros(n)
        else:
            self.f = clip_to_box(
                as_vector(f, name="f", length=n), 0.0, jnp.inf, name="f"
            )

    @classmethod
    def conventional(cls, K: int) -> "EncPolicy":
        """Wait-and-code: never send uncoded (``g = f = 0``)"""
        K = _buffer_size(K)
        return cls(K, jnp.zeros(K + 1))

    @classmethod
    def fcfs(cls, K: int) -> "EncPolicy":
        """First-come-first-serve: send uncoded only when the buffer is full"""
        K = _buffer_size(K)
        return cls(K, jnp.zeros(K + 1).at[K].set(1.0))

    @classmethod
    def always_send(cls, K: int) -> "EncPolicy":
        """Forward every packet on arrival (``g = 1``); nothing is ever stored"""
        K = _buffer_size(K)
        return cls(K, jnp.ones(K + 1))

    @property
    def loss_free(self) -> bool:
        """Whether the policy never drops a packet, i.e. ``g_K = 1``"""
        return bool(self.g[self.K] == 1.0)


class RateParams(eqx.Module):
    """Birth and death rates of the buffer-state chain

    Args:
        lam (Quantity): Per-source Poisson arrival rate [1/s], strictly positive.
        up (Array): Upward rates ``lambda_0..lambda_K`` [1/s], with
            ``0 <= lambda_0 <= 2 lam`` and ``0 <= lambda_k <= lam`` above.
            ``lambda_K`` is the rate at which arrivals are dropped from a full
            buffer.
        down (Array): Downward rates ``mu_1..mu_K`` [1/s], each ``>= lam``.
    """

    K: int = eqx.field(static=True)
    lam: float
    up: Array
    down: Array

    @units.quantity_input(lam=ureg.Hz)
    def __init__(self, *, lam: Quantity, up: Array, down: Array):
        lam = units.magnitude(lam)
        if not (lam > 0 and math.isfinite(lam)):
            raise ValueError(f"The arrival rate 'lam' must be positive; got {lam!r}")
        up = jnp.atleast_1d(units.array_magnitude(up, ureg.Hz))
        self.K = _buffer_size(up.shape[0] - 1)
        self.lam = lam
        up = as_vector(up, name="up", length=self.K + 1)
        upper = jnp.full(self.K + 1, lam).at[0].set(2 * lam)
        self.up = clip_to_box(up, 0.0, upper, name="up")
        down = as_vector(
            units.array_magnitude(down, ureg.Hz), name="down", length=self.K
        )
        self.down = clip_to_box(down, lam, jnp.inf, name="down")


class StationaryDist(eqx.Module):
    """Stationary probabilities ``pi_0..pi_K`` of the buffer-state chain"""

    pi: Array

    def __init__(self, pi: Array):
        pi = jnp.asarray(pi, dtype=jnp.float64)
        if pi.ndim != 1 or pi.shape[0] < 2:
            raise ValueError("'pi' must be a vector with at least two states")
        pi = as_vector(pi, name="pi", length=pi.shape[0])
        if bool(jnp.any(pi < -ANALYTIC_ATOL)):
            raise ValueError("Stationary probabilities must be non-negative")
        total = float(jnp.sum(pi))
        if abs(total - 1.0) > ANALYTIC_ATOL:
            raise ValueError(f"Stationary probabilities sum to {total!r}, not 1")
        self.pi = jnp.maximum(pi, 0.0)

    @property
    def K(self) -> int:
        return self.pi.shape[0] - 1


class Metrics(eqx.Module):
    """Closed-form network-layer performance of a policy

    Args:
        delay: Mean packet delay ``D`` [s]
        loss: Normalized packet-loss rate ``xi``
        energy: Average relay energy ``E^ave`` [W] for the given per-transmission
            energy
        normalized_energy: ``E^ave / (epsilon * lam)``
    """

    delay: float = eqx.field(converter=float)
    loss: float = eqx.field(converter=float)
    energy: float = eqx.field(converter=float)
    normalized_energy: float = eqx.field(converter=float)

    def __check_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("The mean delay cannot be negative")
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError("The loss rate must lie in [0, 1]")


@units.quantity_input(lam=ureg.Hz)
def policy_to_rates(policy: EncPolicy, lam: Quantity) -> RateParams:
    """Chain rates of an ENC policy under per-source Poisson arrivals

    ``lambda_0 = 2 lam (1 - g_0)``, ``lambda_k = lam (1 - g_k)`` and
    ``mu_k = lam + f_k`` for ``1 <= k <= K``.
    """
    lam_ = units.magnitude(lam)
    if not lam_ > 0:
        raise ValueError(f"The arrival rate 'lam' must be positive; got {lam_!r}")
    up = lam_ * (1.0 - policy.g)
    up = up.at[0].multiply(2.0)
    down = lam_ + policy.f[1:]
    return RateParams(lam=lam_, up=up, down=down)


def rates_to_policy(rates: RateParams) -> EncPolicy:
    """Invert :func:`policy_to_rates`

    Raises:
        ValueError: If the rates leave the constraint box, which would give
            ``g`` outside ``[0, 1]`` or negative ``f``
    """
    lam = rates.lam
    g = 1.0 - rates.up / lam
    g = g.at[0].set(1.0 - rates.up[0] / (2 * lam))
    f = jnp.concatenate([jnp.zeros(1), rates.down - lam])
    return EncPolicy(rates.K, g, f)


def stationary(rates: RateParams) -> StationaryDist:
    """The stationary distribution of the buffer-state chain in product form

    States above the first zero upward rate get probability exactly zero.
    """
    if bool(jnp.any(rates.down <= 0)):
        raise ValueError(
            "All downward rates must be positive; the chain has an absorbing state"
        )
    return StationaryDist(product_form(rates.up, rates.down))


def mean_backlog(dist: StationaryDist) -> float:
    """The time-average number of stored packets, ``sum_k k pi_k``"""
    k = jnp.arange(dist.K + 1)
    return float(jnp.sum(k * dist.pi))


@units.quantity_input(lam=ureg.Hz)
def mean_delay(dist: StationaryDist, lam: Quantity) -> float:
    """Mean delay ``D = sum_k k pi_k / (2 lam)`` [s]

    This is the time-average backlog divided by the total arrival rate ``2 lam``.
    Dropped packets count with zero delay, so for a lossy policy the mean over
    delivered packets alone is ``D / (1 - xi)``.
    """
    lam_ = units.magnitude(lam)
    if not lam_ > 0:
        raise ValueError(f"The arrival rate 'lam' must be positive; got {lam_!r}")
    return mean_backlog(dist) / (2 * lam_)


def _check_match(dist: StationaryDist, rates: RateParams) -> None:
    if dist.K != rates.K:
        raise ValueError(
            f"The distribution has {dist.K + 1} states but the rates describe "
            f"{rates.K + 1}"
        )


def loss_rate(dist: StationaryDist, rates: RateParams) -> float:
    """Normalized packet-loss rate ``xi = pi_K lambda_K / (2 lam)``"""
    _check_match(dist, rates)
    top = rates.up[rates.K]
    if float(top) == 0.0:
        return 0.0
    return float(dist.pi[rates.K] * top / (2 * rates.lam))


@units.quantity_input(epsilon=ureg.J)
def state_energy_rates(rates: RateParams, epsilon: Quantity = 1.0) -> Array:
    """Transmission power [W] conditioned on each buffer state

    ``epsilon (2 lam - lambda_0)`` in state 0 and
    ``epsilon (mu_k - lambda_k + lam)`` in state ``k >= 1``.
    """
    eps = units.magnitude(epsilon)
    lam = rates.lam
    rest = rates.down - rates.up[1:] + lam
    return eps * jnp.concatenate([jnp.atleast_1d(2 * lam - rates.up[0]), rest])


@units.quantity_input(epsilon=ureg.J)
def energy(
    dist: StationaryDist, rates: RateParams, epsilon: Quantity = 1.0
) -> tuple[float, float]:
    """Average relay energy and its normalized form

    Returns:
        ``(E^ave, E_bar)`` with ``E^ave = epsilon (lam pi_0 + lam - lambda_K pi_K)``
        [W] and ``E_bar = E^ave / (epsilon lam) = pi_0 + 1 - 2 xi``
    """
    _check_match(dist, rates)
    eps = units.magnitude(epsilon)
    if not eps > 0:
        raise ValueError(
            f"The per-transmission energy 'epsilon' must be positive; got {eps!r}"
        )
    lam = rates.lam
    pi = dist.pi
    e_ave = float(eps * (lam * pi[0] + lam - rates.up[rates.K] * pi[rates.K]))
    return e_ave, e_ave / (eps * lam)


@units.quantity_input(lam=ureg.Hz, epsilon=ureg.J)
def analyze(policy: EncPolicy, lam: Quantity, epsilon: Quantity = 1.0) -> Metrics:
    """Delay, loss and energy of ``policy`` at per-source rate ``lam``"""
    rates = policy_to_rates(policy, lam)
    dist = stationary(rates)
    e_ave, e_bar = energy(dist, rates, epsilon)
    return Metrics(
        delay=mean_delay(dist, lam),
        loss=loss_rate(dist, rates),
        energy=e_ave,
        normalized_energy=e_bar,
    )
