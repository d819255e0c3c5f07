"""Plot-ready CSV bundles for the standard figures

- Figure 4: ``R(t)`` of conventional coding with an unbounded buffer
  (``fig4_conventional.csv``) against FCFS ENC with ``K`` packets
  (``fig4_enc.csv``).
- Figure 5: ``g_K`` against the tolerated loss ``xi`` (``fig5_theory.csv``)
  and the simulated loss of those policies (``fig5_sim.csv``).
- Figure 6: loss ``1 / (1 + 2K)`` of conventional coding (``fig6_theory.csv``,
  ``fig6_sim.csv``).
- Figure 7: the optimal delay-energy trade-off (``fig7_theory.csv``) and
  simulations just above each breakpoint (``fig7_sim.csv``).
"""

__all__ = ["FIGURES", "reproduce"]

import logging
from pathlib import Path
from typing import Any, Callable

import numpy as np

from encrelay import model, optimizer, simulator
from encrelay.arrivals import Exponential
from encrelay.cli.tables import Table, write_csv

logger = logging.getLogger(__name__)

# offset above each breakpoint, where the optimal policy has no service timer
SPECIAL_POINT_OFFSET = 1e-6


def _sim(
    params: dict[str, Any], policy: model.EncPolicy, seed: int
) -> simulator.SimMetrics:
    lam = params["lambda"]
    config = simulator.SimConfig(
        policy,
        Exponential(lam),
        horizon=params["horizon"],
        seed=seed,
        replications=params["replications"],
    )
    return simulator.run(config)


def figure4(params: dict[str, Any], seed: int) -> dict[str, Table]:
    K, lam = params["K"], params["lambda"]
    common = {
        "horizon": params["horizon"],
        "warmup": 0.0,
        "seed": seed,
    }
    conventional = simulator.SimConfig(
        model.EncPolicy.conventional(K),
        Exponential(lam),
        buffer_mode=simulator.UNBOUNDED,
        **common,
    )
    enc = simulator.SimConfig(model.EncPolicy.fcfs(K), Exponential(lam), **common)
    header = ("time", "backlog")
    tables = {}
    for name, config in (("conventional", conventional), ("enc", enc)):
        path = simulator.trajectory(config, params["sample_period"])
        rows = list(zip(path.times.tolist(), path.backlog.tolist()))
        tables[f"fig4_{name}.csv"] = Table(header=header, rows=rows)
    return tables


def figure5(params: dict[str, Any], seed: int) -> dict[str, Table]:
    theory, sim = [], []
    for K in params["K"]:
        cap = 1.0 / (1 + 2 * K)
        for xi in np.linspace(0.0, cap, 21).tolist():
            theory.append((K, xi, 1.0 - (1 + 2 * K) * xi))
        for xi in np.linspace(0.0, cap, params["xi_points"]).tolist():
            policy = optimizer.lossy_policy(xi, K)
            metrics = _sim(params, policy, seed)
            sim.append(
                (
                    K,
                    xi,
                    float(policy.g[K]),
                    metrics.loss_rate,
                    metrics.std_errors["loss_rate"],
                )
            )
    return {
        "fig5_theory.csv": Table(header=("K", "xi", "g_K"), rows=theory),
        "fig5_sim.csv": Table(
            header=("K", "xi", "g_K", "loss", "loss_se"), rows=sim
        ),
    }


def figure6(params: dict[str, Any], seed: int) -> dict[str, Table]:
    theory, sim = [], []
    for K in params["K"]:
        policy = model.EncPolicy.conventional(K)
        theory.append((K, model.analyze(policy, params["lambda"]).loss))
        metrics = _sim(params, policy, seed)
        sim.append((K, metrics.loss_rate, metrics.std_errors["loss_rate"]))
    return {
        "fig6_theory.csv": Table(header=("K", "loss"), rows=theory),
        "fig6_sim.csv": Table(header=("K", "loss", "loss_se"), rows=sim),
    }


def figure7(params: dict[str, Any], seed: int) -> dict[str, Table]:
    K, lam, step = params["K"], params["lambda"], params["e_step"]
    grid = [round(1.1 + i * step, 12) for i in range(int(round(1.0 / step)) + 1)]
    theory = []
    for point in optimizer.tradeoff_curve(K, lam, grid):
        delay = point.delay if point.feasible else None
        theory.append((point.e_max, delay, point.feasible))

    sim = []
    for m in range(1, K + 1):
        e_max = 1.0 + 1.0 / (1 + 2 * m) + SPECIAL_POINT_OFFSET
        point = optimizer.optimal_policy(e_max, K, lam)
        metrics = _sim(params, point.policy, seed)
        se = metrics.std_errors
        sim.append(
            (
                m,
                e_max,
                point.delay,
                metrics.mean_delay,
                se["mean_delay"],
                metrics.normalized_energy,
                se["normalized_energy"],
            )
        )
    return {
        "fig7_theory.csv": Table(header=("e_max", "delay", "feasible"), rows=theory),
        "fig7_sim.csv": Table(
            header=(
                "m",
                "e_max",
                "delay_theory",
                "delay",
                "delay_se",
                "energy",
                "energy_se",
            ),
            rows=sim,
        ),
    }


FIGURES: dict[int, Callable[[dict[str, Any], int], dict[str, Table]]] = {
    4: figure4,
    5: figure5,
    6: figure6,
    7: figure7,
}


def reproduce(
    params: dict[str, Any], seed: int, out_dir: Path, precision: int = 9
) -> list[Path]:
    """Write the CSV bundle of ``params["figure"]`` into ``out_dir``"""
    tables = FIGURES[params["figure"]](params, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in tables.items():
        path = out_dir / name
        with path.open("w", newline="", encoding="utf-8") as f:
            write_csv(f, table, precision)
        logger.info("Wrote %d rows to %s", len(table.rows), path)
        written.append(path)
    return written
