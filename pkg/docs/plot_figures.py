"""Plot the CSV bundles written by ``enc-relay reproduce-fig``

Usage: ``python plot_figures.py <csv-directory> [<output-directory>]``
"""

import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return {key: [row[key] for row in rows] for key in rows[0]} if rows else {}


def floats(values):
    return [float(v) if v != "" else float("nan") for v in values]


def figure4(src, ax):
    for name, label in (("conventional", "conventional NC"), ("enc", "ENC")):
        data = read(src / f"fig4_{name}.csv")
        ax.step(floats(data["time"]), floats(data["backlog"]), where="post", label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("R(t)")


def figure5(src, ax):
    theory = read(src / "fig5_theory.csv")
    sim = read(src / "fig5_sim.csv")
    for K in sorted(set(theory["K"]), key=int):
        idx = [i for i, k in enumerate(theory["K"]) if k == K]
        ax.plot([float(theory["xi"][i]) for i in idx], [float(theory["g_K"][i]) for i in idx],
                label=f"K={K}")
        jdx = [i for i, k in enumerate(sim["K"]) if k == K]
        ax.plot([float(sim["loss"][i]) for i in jdx], [float(sim["g_K"][i]) for i in jdx], "o")
    ax.set_xlabel("loss")
    ax.set_ylabel("g_K")


def figure6(src, ax):
    theory = read(src / "fig6_theory.csv")
    sim = read(src / "fig6_sim.csv")
    ax.plot(floats(theory["K"]), floats(theory["loss"]), label="1/(1+2K)")
    ax.errorbar(floats(sim["K"]), floats(sim["loss"]), yerr=floats(sim["loss_se"]), fmt="o")
    ax.set_xlabel("K")
    ax.set_ylabel("loss")


def figure7(src, ax):
    theory = read(src / "fig7_theory.csv")
    sim = read(src / "fig7_sim.csv")
    ax.plot(floats(theory["e_max"]), floats(theory["delay"]), label="optimal")
    ax.plot(floats(sim["energy"]), floats(sim["delay"]), "s", label="simulated")
    ax.set_xlabel("normalized energy")
    ax.set_ylabel("delay [s]")


def main(argv):
    src = Path(argv[1])
    out = Path(argv[2]) if len(argv) > 2 else src
    for number, draw in ((4, figure4), (5, figure5), (6, figure6), (7, figure7)):
        if not any(src.glob(f"fig{number}_*.csv")):
            continue
        fig, ax = plt.subplots()
        draw(src, ax)
        ax.legend()
        fig.savefig(out / f"fig{number}.png", dpi=150, bbox_inches="tight")
        plt.close(fig)


if __name__ == "__main__":
    main(sys.argv)
