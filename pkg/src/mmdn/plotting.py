"""PNG figures for run records (Agg backend, no display needed)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .problems import make_problem  # noqa: E402


def plot_record(record, path, front_points: int = 500) -> Path:
    """Final approximation set, reference set and true front of one record."""
    Y = np.asarray(record.Y, dtype=float)
    front = make_problem(record.problem).front_sample(front_points)
    k = Y.shape[1]
    fig = plt.figure(figsize=(5, 4.5))
    ax = fig.add_subplot(projection="3d" if k == 3 else None)
    ax.scatter(*front.T, s=2, c="0.75", label="Pareto front")
    if record.R is not None:
        ax.scatter(*np.asarray(record.R, dtype=float).T, s=14, marker="x", c="tab:orange", label="reference set")
    ax.scatter(*Y.T, s=12, c="tab:blue", label=record.mode)
    ax.set_xlabel("$f_1$")
    ax.set_ylabel("$f_2$")
    if k == 3:
        ax.set_zlabel("$f_3$")
    ax.set_title(f"{record.problem} seed {record.seed}  $\\Delta_2$={record.delta2:.4g}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_summary(records, path) -> Path:
    """Box plot of final Delta_2 per (problem, mode)."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.problem, r.mode), []).append(r.delta2)
    keys = sorted(groups)
    fig, ax = plt.subplots(figsize=(max(4, 1.1 * len(keys)), 4))
    ax.boxplot([groups[k] for k in keys], whis=(10, 90))
    ax.set_xticks(range(1, len(keys) + 1), [f"{p}\n{m}" for p, m in keys], fontsize=8)
    ax.set_ylabel("$\\Delta_2$")
    ax.set_yscale("log")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
