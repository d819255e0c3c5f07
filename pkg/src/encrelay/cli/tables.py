"""Row builders and the deterministic CSV writer behind each command

Floats are written with ``csv_precision`` significant digits (``%g`` style),
integers as integers, booleans as ``1``/``0``, missing values as empty fields,
and vectors as compact JSON lists. Lines end with ``\\n`` whatever the platform.
"""

__all__ = [
    "Table",
    "analyze_table",
    "format_value",
    "optimize_table",
    "overflow_table",
    "simulate_table",
    "tradeoff_table",
    "write_csv",
]

import csv
import logging
import math
from typing import Any, TextIO

import equinox as eqx
import numpy as np

from encrelay import model, optimizer, simulator
from encrelay.cli.config import build_arrivals, build_policy
from encrelay.optimizer import EnergyBudget, TradeoffPoint

logger = logging.getLogger(__name__)


class Table(eqx.Module):
    """A CSV table: a fixed header and rows of raw values"""

    header: tuple[str, ...] = eqx.field(static=True)
    rows: list[tuple[Any, ...]]
    all_infeasible: bool = eqx.field(static=True, default=False)


def format_value(value: Any, precision: int = 9) -> str:
    """The CSV text of one value"""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if np.ndim(value) > 0:
        items = np.asarray(value).ravel().tolist()
        return "[" + ",".join(format_value(item, precision) for item in items) + "]"
    value = float(value)
    if math.isnan(value):
        return ""
    if value == 0.0:
        return "0"
    return f"{value:.{precision}g}"


def write_csv(stream: TextIO, table: Table, precision: int = 9) -> None:
    """Write ``table`` to ``stream``"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([format_value(value, precision) for value in row])


def analyze_table(params: dict[str, Any]) -> Table:
    K, lam, epsilon = params["K"], params["lambda"], params["epsilon"]
    policy = build_policy(params["policy"], K, lam)
    metrics = model.analyze(policy, lam, epsilon)
    row = (
        K,
        lam,
        epsilon,
        metrics.delay,
        metrics.loss,
        metrics.energy,
        metrics.normalized_energy,
    )
    return Table(
        header=(
            "K",
            "lambda",
            "epsilon",
            "delay",
            "loss",
            "energy",
            "normalized_energy",
        ),
        rows=[row],
    )


def _policy_vectors(point: TradeoffPoint) -> tuple[Any, Any]:
    if point.policy is None:
        return None, None
    return point.policy.g, point.policy.f


def _delay(point: TradeoffPoint) -> Any:
    return point.delay if point.feasible else None


def optimize_table(params: dict[str, Any]) -> Table:
    budget = EnergyBudget(params["e_max"], params["K"], params["lambda"], params["xi"])
    point = optimizer.optimal_tradeoff(budget)
    energy = None
    if point.policy is not None:
        energy = model.analyze(point.policy, budget.lam).normalized_energy
    g, f = _policy_vectors(point)
    row = (
        budget.e_max,
        budget.xi_allowed,
        _delay(point),
        point.k_star,
        point.feasible,
        energy,
        g,
        f,
    )
    return Table(
        header=("e_max", "xi", "delay", "k_star", "feasible", "energy", "g", "f"),
        rows=[row],
        all_infeasible=not point.feasible,
    )


def tradeoff_table(params: dict[str, Any]) -> Table:
    points = optimizer.tradeoff_curve(params["K"], params["lambda"], params["e_grid"])
    rows = []
    for point in points:
        g, f = _policy_vectors(point)
        rows.append((point.e_max, _delay(point), point.k_star, point.feasible, g, f))
    return Table(
        header=("e_max", "delay", "k_star", "feasible", "g", "f"),
        rows=rows,
        all_infeasible=not any(point.feasible for point in points),
    )


SIMULATE_HEADER = (
    "K",
    "replication",
    "seed",
    "arrivals",
    "coded_tx",
    "uncoded_tx",
    "drops",
    "final_queue",
    "mean_delay",
    "delay_per_arrival",
    "loss",
    "normalized_energy",
    "mean_delay_se",
    "delay_per_arrival_se",
    "loss_se",
    "normalized_energy_se",
)


def simulation_config(params: dict[str, Any], K: int, seed: int) -> simulator.SimConfig:
    """A :class:`~encrelay.simulator.SimConfig` from validated parameters"""
    lam = params["lambda"]
    return simulator.SimConfig(
        build_policy(params["policy"], K, lam),
        build_arrivals(params.get("arrivals_a"), lam),
        build_arrivals(params.get("arrivals_b"), lam),
        horizon=params["horizon"],
        warmup=params.get("warmup"),
        seed=seed,
        replications=params.get("replications", 1),
        buffer_mode=params.get("buffer_mode", simulator.FINITE),
    )


def simulate_rows(K: int, metrics: simulator.SimMetrics) -> list[tuple[Any, ...]]:
    """One row per replication followed by the aggregate row"""
    rows = []
    for r, rep in enumerate(metrics.per_replication):
        rows.append(
            (
                K,
                r,
                rep.seed,
                rep.arrivals,
                rep.coded_tx,
                rep.uncoded_tx,
                rep.drops,
                rep.final_queue,
                rep.mean_delay,
                rep.delay_per_arrival,
                rep.loss_rate,
                rep.normalized_energy,
                None,
                None,
                None,
                None,
            )
        )
    se = metrics.std_errors
    rows.append(
        (
            K,
            "all",
            metrics.seed,
            metrics.arrivals,
            metrics.coded_tx,
            metrics.uncoded_tx,
            metrics.drops,
            metrics.final_queue,
            metrics.mean_delay,
            metrics.delay_per_arrival,
            metrics.loss_rate,
            metrics.normalized_energy,
            se["mean_delay"],
            se["delay_per_arrival"],
            se["loss_rate"],
            se["normalized_energy"],
        )
    )
    return rows


def simulate_table(params: dict[str, Any], seed: int) -> Table:
    rows = []
    for K in params["K"]:
        logger.info("Simulating K=%d for %.6g s", K, params["horizon"])
        metrics = simulator.run(simulation_config(params, K, seed))
        rows.extend(simulate_rows(K, metrics))
    return Table(header=SIMULATE_HEADER, rows=rows)


def overflow_table(params: dict[str, Any], seed: int) -> Table:
    q_total, trials = params["q_total"], params["trials"]
    rows = []
    for K in params["K"]:
        probability = simulator.overflow_experiment(q_total, K, trials, seed)
        theory = simulator.overflow_probability(q_total, K)
        rows.append((K, q_total, trials, probability, theory))
    return Table(
        header=("K", "q_total", "trials", "probability", "theory"), rows=rows
    )
