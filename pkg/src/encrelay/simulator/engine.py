"""Event-driven Monte Carlo simulation of the relay

The relay stores packets from one direction at a time in a single FIFO. Three
events compete: the next arrival from A, the next arrival from B, and (while
packets are stored and ``f_k > 0``) an exponential service timer. Transmissions
take no time.

An arrival when the opposite direction is queued triggers one coded
transmission of the arriving packet with the oldest stored one. Otherwise the
relay flips the ``g_k`` coin: on success it sends the oldest packet uncoded (the
arriving one itself when nothing is stored) and stores the new one; on failure
it stores the new packet, or drops it when the buffer is full. A service event
sends the oldest stored packet uncoded.

Random numbers are consumed in this order: the first gap of A, then the first
gap of B; at every arrival, the next gap of the same source, then the ``g_k``
coin (only when the arrival does not trigger a coded transmission), then a new
service timer if the backlog changed. The timer rate is read from the backlog
after the coin. Ties are resolved A before B before the service timer.
"""

__all__ = [
    "FINITE",
    "UNBOUNDED",
    "ReplicationMetrics",
    "SimConfig",
    "SimMetrics",
    "Trajectory",
    "run",
    "trajectory",
]

import logging
import math
from collections import deque
from typing import Optional

import equinox as eqx
import numpy as np

from encrelay import units
from encrelay.arrivals import long_term_rate
from encrelay.model import EncPolicy
from encrelay.proto import ArrivalModel
from encrelay.streams import RandomStream, replication_seed
from encrelay.types import Quantity
from encrelay.units import unit_registry as ureg

logger = logging.getLogger(__name__)

FINITE = "finite"
UNBOUNDED = "unbounded"


def default_warmup(rate: float, horizon: float) -> float:
    """``max(100 / rate, horizon / 100)``, capped at half the horizon"""
    return min(max(100.0 / rate, 0.01 * horizon), 0.5 * horizon)


class SimConfig(eqx.Module):
    """A complete, validated description of a simulation

    Args:
        policy (EncPolicy): The ENC policy; its ``K`` is the buffer size in
            finite mode
        arrivals_a (ArrivalModel): Gap law of source A
        arrivals_b (ArrivalModel): Gap law of source B; defaults to the law of A
        horizon (Quantity): Simulated time per replication [s]
        warmup (Quantity, optional): Initial period excluded from the measured
            rates [s]. Defaults to ``max(100 / lambda', horizon / 100)`` capped
            at half the horizon, with ``lambda'`` the slower long-term rate.
        seed (int): Unsigned 64-bit seed; replication ``r`` uses
            ``seed ^ splitmix64(r)``
        replications (int): Number of independent replications
        buffer_mode (str): ``"finite"`` for the ENC relay with a ``K``-packet
            buffer, or ``"unbounded"`` for conventional network coding with an
            infinite buffer (``g`` and ``f`` are then ignored)
    """

    policy: EncPolicy
    arrivals_a: ArrivalModel
    arrivals_b: ArrivalModel
    horizon: float
    warmup: float
    seed: int = eqx.field(static=True)
    replications: int = eqx.field(static=True)
    buffer_mode: str = eqx.field(static=True)

    @units.quantity_input(horizon=ureg.s, warmup=ureg.s)
    def __init__(
        self,
        policy: EncPolicy,
        arrivals_a: ArrivalModel,
        arrivals_b: Optional[ArrivalModel] = None,
        *,
        horizon: Quantity,
        warmup: Optional[Quantity] = None,
        seed: int = 0,
        replications: int = 1,
        buffer_mode: str = FINITE,
    ):
        if buffer_mode not in (FINITE, UNBOUNDED):
            raise ValueError(
                f"'buffer_mode' must be '{FINITE}' or '{UNBOUNDED}'; "
                f"got {buffer_mode!r}"
            )
        horizon = units.magnitude(horizon)
        if not (horizon > 0 and math.isfinite(horizon)):
            raise ValueError(f"'horizon' must be positive and finite; got {horizon!r}")
        arrivals_b = arrivals_a if arrivals_b is None else arrivals_b
        if warmup is None:
            slowest = min(long_term_rate(arrivals_a), long_term_rate(arrivals_b))
            warmup = default_warmup(slowest, horizon)
        else:
            warmup = units.magnitude(warmup)
        if not 0 <= warmup < horizon:
            raise ValueError(
                f"'warmup' must lie in [0, horizon); got {warmup!r} for a horizon "
                f"of {horizon!r}"
            )
        if isinstance(replications, bool) or int(replications) != replications:
            raise ValueError("'replications' must be an integer")
        if replications < 1:
            raise ValueError(f"'replications' must be at least 1; got {replications}")
        # validates the seed
        replication_seed(seed, 0)

        self.policy = policy
        self.arrivals_a = arrivals_a
        self.arrivals_b = arrivals_b
        self.horizon = horizon
        self.warmup = float(warmup)
        self.seed = int(seed)
        self.replications = int(replications)
        self.buffer_mode = buffer_mode

    @property
    def K(self) -> int:
        return self.policy.K

    @property
    def mean_rate(self) -> float:
        """Mean of the two long-term arrival rates [1/s]"""
        return 0.5 * (
            long_term_rate(self.arrivals_a) + long_term_rate(self.arrivals_b)
        )


class ReplicationMetrics(eqx.Module):
    """Counts and measured rates of one replication

    Counts cover the whole run, so
    ``2 coded_tx + uncoded_tx + drops + final_queue == arrivals`` holds exactly.
    Rates only use the part of the run after the warmup.
    """

    seed: int = eqx.field(static=True)
    arrivals: int = eqx.field(static=True)
    coded_tx: int = eqx.field(static=True)
    uncoded_tx: int = eqx.field(static=True)
    drops: int = eqx.field(static=True)
    final_queue: int = eqx.field(static=True)
    max_backlog: int = eqx.field(static=True)
    mean_delay: float
    delay_per_arrival: float
    loss_rate: float
    normalized_energy: float
    mean_backlog: float
    state_occupancy: np.ndarray


class SimMetrics(eqx.Module):
    """Aggregated simulation results

    Args:
        mean_delay: Mean sojourn [s] of delivered packets
        delay_per_arrival: Total sojourn over all arrivals [s], with dropped
            packets counting zero; this is the quantity ``sum_k k pi_k / 2 lam``
        loss_rate: Dropped over arrived packets
        normalized_energy: Transmissions per unit time over the mean long-term
            arrival rate
        state_occupancy: Fraction of measured time spent with ``|R| = k``
        std_errors: Standard errors of the rate estimates across replications
            (``nan`` for a single replication)
        per_replication: The individual replication records
    """

    seed: int = eqx.field(static=True)
    arrivals: int = eqx.field(static=True)
    coded_tx: int = eqx.field(static=True)
    uncoded_tx: int = eqx.field(static=True)
    drops: int = eqx.field(static=True)
    final_queue: int = eqx.field(static=True)
    mean_delay: float
    delay_per_arrival: float
    loss_rate: float
    normalized_energy: float
    mean_backlog: float
    state_occupancy: np.ndarray
    std_errors: dict[str, float]
    per_replication: tuple[ReplicationMetrics, ...]


class Trajectory(eqx.Module):
    """The signed backlog ``R(t)`` sampled on a regular grid

    ``R > 0`` counts packets stored from A and ``R < 0`` packets from B.
    """

    times: np.ndarray
    backlog: np.ndarray

    @property
    def samples(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.backlog.tolist()))

    @property
    def max_abs_backlog(self) -> int:
        return int(np.max(np.abs(self.backlog))) if self.backlog.size else 0


_RATE_FIELDS = ("mean_delay", "delay_per_arrival", "loss_rate", "normalized_energy")


def run(config: SimConfig) -> SimMetrics:
    """Simulate every replication of ``config`` and aggregate the results"""
    records = []
    for r in range(config.replications):
        seed = replication_seed(config.seed, r)
        record, _ = _simulate(config, seed)
        logger.debug(
            "Replication %d (seed %d): %d arrivals, loss %.6g, delay %.6g",
            r,
            seed,
            record.arrivals,
            record.loss_rate,
            record.mean_delay,
        )
        records.append(record)
    return _aggregate(config, records)


@units.quantity_input(sample_period=ureg.s)
def trajectory(config: SimConfig, sample_period: Quantity) -> Trajectory:
    """Sample ``R(t)`` every ``sample_period`` over the first replication

    Samples are taken at ``0, p, 2p, ...`` up to the horizon and record the
    backlog after all events at or before each sample time.
    """
    period = units.magnitude(sample_period)
    if not (period > 0 and math.isfinite(period)):
        raise ValueError(
            f"'sample_period' must be positive and finite; got {period!r}"
        )
    _, samples = _simulate(config, replication_seed(config.seed, 0), period)
    assert samples is not None
    times, backlog = samples
    return Trajectory(times=np.asarray(times), backlog=np.asarray(backlog, dtype=int))


def _aggregate(config: SimConfig, records: list[ReplicationMetrics]) -> SimMetrics:
    n = len(records)
    width = max(record.state_occupancy.shape[0] for record in records)
    occupancy = np.zeros(width)
    for record in records:
        occupancy[: record.state_occupancy.shape[0]] += record.state_occupancy
    occupancy /= n

    means = {}
    std_errors = {}
    for name in _RATE_FIELDS + ("mean_backlog",):
        values = np.array([getattr(record, name) for record in records])
        means[name] = float(np.mean(values))
        std_errors[name] = (
            float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        )

    metrics = SimMetrics(
        seed=config.seed,
        arrivals=sum(record.arrivals for record in records),
        coded_tx=sum(record.coded_tx for record in records),
        uncoded_tx=sum(record.uncoded_tx for record in records),
        drops=sum(record.drops for record in records),
        final_queue=sum(record.final_queue for record in records),
        state_occupancy=occupancy,
        std_errors=std_errors,
        per_replication=tuple(records),
        **means,
    )
    logger.info(
        "Simulated %d replication(s) of %.6g s: delay %.6g, loss %.6g, energy %.6g",
        n,
        config.horizon,
        metrics.mean_delay,
        metrics.loss_rate,
        metrics.normalized_energy,
    )
    return metrics


def _simulate(
    config: SimConfig, seed: int, sample_period: Optional[float] = None
) -> tuple[ReplicationMetrics, Optional[tuple[list[float], list[int]]]]:
    stream = RandomStream(seed)
    uniform = stream.uniform
    exponential = stream.exponential
    draw_a = config.arrivals_a.draw
    draw_b = config.arrivals_b.draw

    finite = config.buffer_mode == FINITE
    K = config.K
    g = config.policy.g.tolist()
    f = config.policy.f.tolist()
    horizon = config.horizon
    warmup = config.warmup
    inf = math.inf

    # stored arrival times, oldest first; direction is +1 for A, -1 for B
    queue: deque[float] = deque()
    direction = 0
    occupancy = [0.0] * (K + 1 if finite else 1)

    arrivals = coded = uncoded = drops = 0
    max_backlog = 0
    measured_arrivals = measured_drops = measured_tx = 0
    delivered = 0
    delivered_sojourn = 0.0

    sample_times: list[float] = []
    sample_values: list[int] = []
    next_sample = 0.0 if sample_period is not None else inf

    t_a = draw_a(stream)
    t_b = draw_b(stream)
    t_s = inf
    last = 0.0

    while True:
        if t_a <= t_b and t_a <= t_s:
            now, event = t_a, 1
        elif t_b <= t_s:
            now, event = t_b, -1
        else:
            now, event = t_s, 0
        if now > horizon:
            break

        while next_sample < now:
            sample_times.append(next_sample)
            sample_values.append(direction * len(queue))
            next_sample = len(sample_times) * sample_period
            if next_sample > horizon:
                next_sample = inf

        if now > warmup:
            k = len(queue)
            if k >= len(occupancy):
                occupancy.extend([0.0] * (k + 1 - len(occupancy)))
            occupancy[k] += now - max(last, warmup)
        last = now
        measuring = now >= warmup
        backlog = len(queue)

        if event == 0:
            born = queue.popleft()
            uncoded += 1
            if born >= warmup:
                delivered += 1
                delivered_sojourn += now - born
            if measuring:
                measured_tx += 1
        else:
            arrivals += 1
            if measuring:
                measured_arrivals += 1
            if event == 1:
                t_a = now + draw_a(stream)
            else:
                t_b = now + draw_b(stream)

            if queue and direction != event:
                born = queue.popleft()
                coded += 1
                if born >= warmup:
                    delivered += 1
                    delivered_sojourn += now - born
                if measuring:
                    delivered += 1
                    measured_tx += 1
            elif not finite:
                queue.append(now)
                direction = event
            elif uniform() < g[backlog]:
                uncoded += 1
                if measuring:
                    measured_tx += 1
                if backlog:
                    born = queue.popleft()
                    queue.append(now)
                    if born >= warmup:
                        delivered += 1
                        delivered_sojourn += now - born
                elif measuring:
                    delivered += 1
            elif backlog < K:
                queue.append(now)
                direction = event
            else:
                drops += 1
                if measuring:
                    measured_drops += 1

        size = len(queue)
        if size == 0:
            direction = 0
        if size != backlog:
            if size > max_backlog:
                max_backlog = size
            if finite and size and f[size] > 0:
                t_s = now + exponential(f[size])
            else:
                t_s = inf

    # the final stretch up to the horizon
    while next_sample <= horizon:
        sample_times.append(next_sample)
        sample_values.append(direction * len(queue))
        next_sample = len(sample_times) * sample_period
    k = len(queue)
    if k >= len(occupancy):
        occupancy.extend([0.0] * (k + 1 - len(occupancy)))
    occupancy[k] += horizon - max(last, warmup)

    # packets still stored count toward the per-arrival delay up to the horizon
    residual = sum(horizon - born for born in queue if born >= warmup)
    measured_time = horizon - warmup
    occupancy_array = np.asarray(occupancy) / measured_time
    states = np.arange(occupancy_array.shape[0])

    record = ReplicationMetrics(
        seed=seed,
        arrivals=arrivals,
        coded_tx=coded,
        uncoded_tx=uncoded,
        drops=drops,
        final_queue=len(queue),
        max_backlog=max_backlog,
        mean_delay=delivered_sojourn / delivered if delivered else 0.0,
        delay_per_arrival=(
            (delivered_sojourn + residual) / measured_arrivals
            if measured_arrivals
            else 0.0
        ),
        loss_rate=measured_drops / measured_arrivals if measured_arrivals else 0.0,
        normalized_energy=measured_tx / (config.mean_rate * measured_time),
        mean_backlog=float(np.dot(states, occupancy_array)),
        state_occupancy=occupancy_array,
    )
    samples = (sample_times, sample_values) if sample_period is not None else None
    return record, samples
