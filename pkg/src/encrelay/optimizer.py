"""The optimal delay-energy trade-off of ENC

With ``rho_k = pi_k / pi_0``, minimizing the mean delay under a normalized
energy budget ``E_max`` becomes a linear program in ``rho``: minimize
``sum_k k rho_k`` subject to ``sum_k rho_k = 1 / pi_0 - 1``, ``rho_1 <= 2`` and
``rho_{k+1} <= rho_k``, with ``pi_0`` fixed by the budget. Its solution fills
the lowest states greedily, so the optimal delay is piecewise linear in
``E_max`` with ``K`` segments between ``1 + 1 / (1 + 2K)`` and 2.
"""

__all__ = [
    "BREAKPOINT_RHO_ATOL",
    "EnergyBudget",
    "Infeasible",
    "TradeoffPoint",
    "k_star",
    "lossy_optimal_delay",
    "lossy_policy",
    "lp_oracle",
    "optimal_delay",
    "optimal_policy",
    "optimal_tradeoff",
    "pi0_star",
    "rho_star",
    "threshold",
    "tradeoff_breakpoints",
    "tradeoff_curve",
]

import logging
import math
from collections.abc import Sequence
from typing import Optional, Union

import equinox as eqx
import jax.numpy as jnp
import numpy as np

from encrelay import units
from encrelay.core.simplex import linprog
from encrelay.model import EncPolicy, RateParams, _buffer_size, rates_to_policy
from encrelay.types import Array, Quantity
from encrelay.units import unit_registry as ureg
from encrelay.utils import ANALYTIC_ATOL

logger = logging.getLogger(__name__)

LOSSY_VARIANTS = ("proof", "stated")

# rho_{k*+1} this close to 2 is filled to 2 with no service timer; the
# synthesized policy then sits on the breakpoint just below E_max
BREAKPOINT_RHO_ATOL = 1e-4


class Infeasible(eqx.Module):
    """No policy meets the constraint; the delay is unbounded

    Args:
        threshold: The smallest feasible normalized energy
        reason: A short explanation
    """

    threshold: float = eqx.field(converter=float)
    reason: str = eqx.field(static=True, default="energy budget below threshold")


class EnergyBudget(eqx.Module):
    """The constraints of one trade-off problem

    Args:
        e_max: Normalized energy budget ``E_max``, positive
        K: Buffer size
        lam (Quantity): Per-source arrival rate [1/s]
        xi_allowed: Permitted normalized loss, between 0 and ``1 / (1 + 2K)``
    """

    e_max: float
    K: int = eqx.field(static=True)
    lam: float
    xi_allowed: float

    @units.quantity_input(lam=ureg.Hz)
    def __init__(
        self, e_max: float, K: int, lam: Quantity, xi_allowed: float = 0.0
    ):
        self.K = _buffer_size(K)
        self.e_max = _check_e_max(e_max)
        self.lam = _check_lam(lam)
        self.xi_allowed = _check_xi(xi_allowed, self.K)


class TradeoffPoint(eqx.Module):
    """One point of the trade-off curve

    ``delay`` is an :class:`Infeasible` instance below the energy threshold, in
    which case ``k_star``, ``rho`` and ``policy`` are ``None``.
    """

    e_max: float
    delay: Union[float, Infeasible]
    k_star: Optional[int] = eqx.field(static=True)
    rho: Optional[Array]
    policy: Optional[EncPolicy]
    xi: float = 0.0

    @property
    def feasible(self) -> bool:
        return not isinstance(self.delay, Infeasible)


def _check_e_max(e_max: float) -> float:
    e_max = float(e_max)
    if not (e_max > 0 and math.isfinite(e_max)):
        raise ValueError(f"The energy budget 'e_max' must be positive; got {e_max!r}")
    return e_max


def _check_lam(lam: Quantity) -> float:
    lam = units.magnitude(lam)
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"The arrival rate 'lam' must be positive; got {lam!r}")
    return lam


def _check_xi(xi: float, K: int) -> float:
    xi = float(xi)
    cap = 1.0 / (1 + 2 * K)
    if not 0 <= xi <= cap + ANALYTIC_ATOL:
        raise ValueError(
            f"The allowed loss 'xi' must lie in [0, 1/(1+2K)] = [0, {cap!r}]; "
            f"got {xi!r}"
        )
    return min(xi, cap)


def threshold(K: int) -> float:
    """The smallest loss-free energy budget, ``1 + 1 / (1 + 2K)``"""
    return 1.0 + 1.0 / (1 + 2 * _buffer_size(K))


def tradeoff_breakpoints(K: int) -> list[float]:
    """Energies where the optimal delay changes slope, from the threshold to 2"""
    K = _buffer_size(K)
    return [1.0 + 1.0 / (2 * m + 1) for m in range(K, 0, -1)] + [2.0]


def pi0_star(e_max: float) -> float:
    """The optimal ``pi_0`` for a budget: 0 below 1, ``E_max - 1`` up to 2, then 1"""
    e_max = _check_e_max(e_max)
    if e_max < 1:
        return 0.0
    if e_max <= 2:
        return e_max - 1.0
    return 1.0


def k_star(pi0: float, K: Optional[int] = None) -> int:
    """``floor((1 / pi0 - 1) / 2)``, the number of states filled to ``rho = 2``

    Values within ``1e-12`` (relative) below an integer round up to it. With
    ``K`` given the result is clamped to ``K - 1``.
    """
    pi0 = float(pi0)
    if not 0 < pi0 <= 1:
        raise ValueError(f"'pi0' must lie in (0, 1]; got {pi0!r}")
    half = (1.0 / pi0 - 1.0) / 2
    k = int(math.floor(half * (1 + 1e-12) + ANALYTIC_ATOL))
    if K is not None:
        k = min(k, _buffer_size(K) - 1)
    return k


def rho_star(pi0: float, K: int) -> Union[Array, Infeasible]:
    """The closed-form optimum ``rho_1..rho_K`` of the delay program"""
    K = _buffer_size(K)
    pi0 = float(pi0)
    if not 0 < pi0 <= 1:
        raise ValueError(f"'pi0' must lie in (0, 1]; got {pi0!r}")
    budget = 1.0 / pi0 - 1.0
    if budget > 2 * K * (1 + 1e-9):
        return Infeasible(threshold=threshold(K), reason="pi0 below 1/(1+2K)")
    budget = min(budget, 2.0 * K)
    k = k_star(pi0, K)
    rho = jnp.zeros(K).at[:k].set(2.0)
    return rho.at[k].set(max(budget - 2 * k, 0.0))


def lp_oracle(pi0: float, K: int) -> Union[Array, Infeasible]:
    """Solve the delay program with the in-repo simplex solver

    Variables are ``rho_1..rho_K``; the constraints are ``sum rho = 1/pi0 - 1``,
    ``rho_1 <= 2``, ``rho_{k+1} - rho_k <= 0`` and ``rho >= 0``.
    """
    K = _buffer_size(K)
    pi0 = float(pi0)
    if not 0 < pi0 <= 1:
        raise ValueError(f"'pi0' must lie in (0, 1]; got {pi0!r}")
    c = np.arange(1, K + 1, dtype=float)
    A_ub = np.zeros((K, K))
    b_ub = np.zeros(K)
    A_ub[0, 0] = 1.0
    b_ub[0] = 2.0
    for k in range(1, K):
        A_ub[k, k] = 1.0
        A_ub[k, k - 1] = -1.0
    A_eq = np.ones((1, K))
    b_eq = np.array([1.0 / pi0 - 1.0])
    result = linprog(c, A_ub, b_ub, A_eq, b_eq)
    logger.debug(
        "LP oracle for pi0=%r, K=%d: %s after %d pivots",
        pi0,
        K,
        result.status,
        result.iterations,
    )
    if result.status == "infeasible":
        return Infeasible(threshold=threshold(K), reason="pi0 below 1/(1+2K)")
    if not result.success:  # pragma: no cover
        raise RuntimeError(f"The delay program is {result.status}")
    return jnp.asarray(result.x)


@units.quantity_input(lam=ureg.Hz)
def optimal_delay(e_max: float, K: int, lam: Quantity) -> Union[float, Infeasible]:
    """The minimal loss-free mean delay [s] for a normalized energy budget

    ``(k* + 1) / (2 lam) [1 - (E_max - 1)(k* + 1)]`` between the threshold
    ``1 + 1 / (1 + 2K)`` and 2, zero above 2, and :class:`Infeasible` below the
    threshold.
    """
    K = _buffer_size(K)
    e_max = _check_e_max(e_max)
    lam = _check_lam(lam)
    if e_max < threshold(K) - ANALYTIC_ATOL:
        return Infeasible(threshold=threshold(K))
    pi0 = pi0_star(e_max)
    k = k_star(pi0, K)
    return max((k + 1) / (2 * lam) * (1.0 - pi0 * (k + 1)), 0.0)


@units.quantity_input(lam=ureg.Hz)
def optimal_policy(e_max: float, K: int, lam: Quantity) -> TradeoffPoint:
    """Synthesize an ENC policy on the loss-free trade-off curve

    The chain keeps ``lambda_0 = 2 lam`` and ``lambda_k = lam`` up to ``k*``,
    blocks growth above it, and speeds up the service in state ``k* + 1`` to
    ``mu = 2 lam / rho_{k*+1}``. At a breakpoint, where ``rho_{k*+1} = 0``, the
    same distribution is realized by blocking growth at ``k*`` instead.

    Slightly above a breakpoint, ``rho_{k*+1}`` falls short of 2 by
    ``O(E_max - breakpoint)``. Within :data:`BREAKPOINT_RHO_ATOL` the state is
    filled to 2 with ``f == 0``: the policy realizes the breakpoint energy, which
    is below ``E_max``, and its delay exceeds ``delay`` by ``O(E_max - breakpoint)``.
    """
    K = _buffer_size(K)
    e_max = _check_e_max(e_max)
    lam = _check_lam(lam)
    delay = optimal_delay(e_max, K, lam)
    if isinstance(delay, Infeasible):
        return TradeoffPoint(
            e_max=e_max, delay=delay, k_star=None, rho=None, policy=None
        )

    if e_max >= 2:
        return TradeoffPoint(
            e_max=e_max,
            delay=0.0,
            k_star=0,
            rho=jnp.zeros(K),
            policy=EncPolicy.always_send(K),
        )

    pi0 = pi0_star(e_max)
    rho = rho_star(pi0, K)
    assert not isinstance(rho, Infeasible)
    k = k_star(pi0, K)
    up = jnp.zeros(K + 1).at[0].set(2 * lam).at[1 : k + 1].set(lam)
    down = jnp.full(K, lam)
    top = float(rho[k])
    if top <= ANALYTIC_ATOL:
        up = up.at[k].set(0.0)
    elif top < 2.0 - BREAKPOINT_RHO_ATOL:
        down = down.at[k].set(2 * lam / top)
    policy = rates_to_policy(RateParams(lam=lam, up=up, down=down))
    return TradeoffPoint(e_max=e_max, delay=delay, k_star=k, rho=rho, policy=policy)


@units.quantity_input(lam=ureg.Hz)
def tradeoff_curve(
    K: int, lam: Quantity, e_grid: Sequence[float]
) -> list[TradeoffPoint]:
    """:func:`optimal_policy` at every budget of ``e_grid``, in grid order"""
    K = _buffer_size(K)
    points = [optimal_policy(float(e), K, lam) for e in np.asarray(e_grid).ravel()]
    logger.info(
        "Trade-off curve for K=%d: %d points, %d feasible",
        K,
        len(points),
        sum(point.feasible for point in points),
    )
    return points


@units.quantity_input(lam=ureg.Hz)
def lossy_optimal_delay(e_max: float, xi: float, K: int, lam: Quantity) -> float:
    """Minimal mean delay [s] when a normalized loss ``xi`` is tolerated

    Valid for ``1 + 1/(1+2K) - 2 xi <= E_max <= 1 + 1/(1+2K)``, where the loss
    acts as ``2 xi`` of extra energy: ``K / (2 lam) [1 - (E_max - 1 + 2 xi) K]``.
    """
    K = _buffer_size(K)
    e_max = _check_e_max(e_max)
    lam = _check_lam(lam)
    xi = _check_xi(xi, K)
    upper = threshold(K)
    lower = upper - 2 * xi
    if not lower - ANALYTIC_ATOL <= e_max <= upper + ANALYTIC_ATOL:
        raise ValueError(
            f"'e_max' must lie in [{lower!r}, {upper!r}] for xi={xi!r}; "
            f"got {e_max!r}"
        )
    return K / (2 * lam) * (1.0 - (e_max - 1.0 + 2 * xi) * K)


def lossy_policy(xi: float, K: int, variant: str = "proof") -> EncPolicy:
    """A conventional-coding policy that drops a fraction ``xi`` of packets

    ``g_K = 1 - (1 + 2K) xi`` and ``f = 0``. With ``variant="proof"`` the
    relay never sends uncoded below a full buffer (``g_k = 0`` for ``k < K``),
    which gives exactly loss ``xi`` and ``pi_0 = 1 / (1 + 2K)``. The
    ``"stated"`` variant uses ``g_k = 1`` below ``K`` instead; the buffer then
    never fills and nothing is lost.
    """
    if variant not in LOSSY_VARIANTS:
        raise ValueError(
            f"'variant' must be one of {LOSSY_VARIANTS}; got {variant!r}"
        )
    K = _buffer_size(K)
    xi = _check_xi(xi, K)
    g_top = max(1.0 - (1 + 2 * K) * xi, 0.0)
    below = 0.0 if variant == "proof" else 1.0
    return EncPolicy(K, jnp.full(K + 1, below).at[K].set(g_top))


def _lossy_rates(e_max: float, xi: float, K: int, lam: float) -> Optional[RateParams]:
    # states below K filled to rho = 2, the top state holds the rest and drops
    pi0 = e_max - 1.0 + 2 * xi
    rho_top = 1.0 / pi0 - 1.0 - 2 * (K - 1)
    pi_top = pi0 * rho_top
    if rho_top < -ANALYTIC_ATOL or rho_top > 2 + ANALYTIC_ATOL:
        return None
    if xi > 0 and pi_top < 2 * xi * (1 - 1e-12):
        return None
    up = jnp.full(K + 1, lam).at[0].set(2 * lam)
    up = up.at[K].set(min(2 * xi * lam / pi_top, lam) if xi > 0 else 0.0)
    down = jnp.full(K, lam)
    if rho_top > ANALYTIC_ATOL:
        down = down.at[K - 1].set(2 * lam / rho_top)
    else:
        up = up.at[K - 1].set(0.0)
    return RateParams(lam=lam, up=up, down=down)


def optimal_tradeoff(budget: EnergyBudget) -> TradeoffPoint:
    """The optimal point for an :class:`EnergyBudget`

    Without allowed loss this is :func:`optimal_policy`. With loss ``xi``,
    budgets above the loss-free threshold use the loss-free solution, budgets
    in the window ``[threshold - 2 xi, threshold]`` use
    :func:`lossy_optimal_delay`, and lower budgets are infeasible. A lossy point
    carries a policy only when a single lossy top state can realize it.
    """
    K, lam, e_max, xi = budget.K, budget.lam, budget.e_max, budget.xi_allowed
    upper = threshold(K)
    if xi == 0 or e_max > upper + ANALYTIC_ATOL:
        return optimal_policy(e_max, K, lam)
    if e_max < upper - 2 * xi - ANALYTIC_ATOL:
        return TradeoffPoint(
            e_max=e_max,
            delay=Infeasible(threshold=upper - 2 * xi),
            k_star=None,
            rho=None,
            policy=None,
            xi=xi,
        )
    e_max = min(max(e_max, upper - 2 * xi), upper)
    delay = lossy_optimal_delay(e_max, xi, K, lam)
    rates = _lossy_rates(e_max, xi, K, lam)
    policy = None if rates is None else rates_to_policy(rates)
    if rates is None:
        logger.warning(
            "No single-drop-state policy realizes e_max=%r with xi=%r (K=%d)",
            e_max,
            xi,
            K,
        )
    pi0 = e_max - 1.0 + 2 * xi
    rho = jnp.full(K, 2.0).at[K - 1].set(max(1.0 / pi0 - 1.0 - 2 * (K - 1), 0.0))
    return TradeoffPoint(
        e_max=budget.e_max,
        delay=delay,
        k_star=K - 1,
        rho=rho,
        policy=policy,
        xi=xi,
    )
