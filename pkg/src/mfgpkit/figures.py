"""Matplotlib rendering of the report outputs.

Each CLI report path writes a PNG next to its delimited output: grouped RMSE
bars for benchmark runs, the RMSE-vs-subset-size curve for feature
selection, a first-component scatter for PCA, and the function/sample
overview for generated synthetic instances. Figures are rendered on the Agg
backend with fixed styling so identical inputs produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150
_COLORS = ["#b5442d", "#3c6ec7", "#1d8a99", "#e08b2d", "#b45bb0"]


def _save(fig, path, description: str | None) -> None:
    metadata = {"Description": description} if description else None
    fig.savefig(path, dpi=_DPI, metadata=metadata)
    plt.close(fig)


def save_benchmark_bars(report, path, description: str | None = None) -> None:
    """Grouped bar chart of mean RMSE per method and training-set size."""
    methods = list(dict.fromkeys(c.method for c in report.cells))
    n_t_values = list(dict.fromkeys(c.n_t for c in report.cells))
    fig, ax = plt.subplots(figsize=(9, 4.5))
    width = 0.8 / max(len(methods), 1)
    base = np.arange(len(n_t_values), dtype=float)
    for mi, method in enumerate(methods):
        heights = []
        for n_t in n_t_values:
            cell = report.cell(method, n_t)
            heights.append(cell.mean_rmse if cell.rmse_values else 0.0)
        pos = base + (mi - (len(methods) - 1) / 2.0) * width
        bars = ax.bar(pos, heights, width=width * 0.95,
                      color=_COLORS[mi % len(_COLORS)], label=method)
        ax.bar_label(bars, fmt="%.3f", fontsize=7)
    ax.set_xticks(base)
    ax.set_xticklabels([f"$N_t$={v}" for v in n_t_values])
    ax.set_ylabel("mean RMSE")
    ax.grid(axis="y", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8, ncol=min(len(methods), 5), frameon=False)
    fig.tight_layout()
    _save(fig, path, description)


def save_sweep_curve(points, path, description: str | None = None) -> None:
    """RMSE against the number of selected features."""
    xs = [p.n_f for p in points]
    ys = [p.mean_rmse for p in points]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(xs, ys, marker="o", linestyle="--", color=_COLORS[0], linewidth=1.5)
    ax.set_xlabel("number of selected features")
    ax.set_ylabel("mean RMSE")
    ax.grid(linewidth=0.3, alpha=0.5)
    if xs:
        ax.set_xticks(xs if len(xs) <= 25 else None)
    fig.tight_layout()
    _save(fig, path, description)


def save_pca_scatter(component, y, fidelity, path, description: str | None = None,
                     level_names=None) -> None:
    """First principal component against the target, one series per level."""
    component = np.asarray(component, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fidelity = np.asarray(fidelity)
    levels = sorted(set(int(v) for v in fidelity))
    markers = ["D", "o", "s", "^"]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, level in enumerate(levels):
        mask = fidelity == level
        name = None
        if level_names and i < len(level_names):
            name = str(level_names[i])
        ax.scatter(component[mask], y[mask], s=28,
                   color=_COLORS[i % len(_COLORS)],
                   marker=markers[i % len(markers)],
                   label=name or f"level {level}")
    ax.set_xlabel("first principal component")
    ax.set_ylabel("target")
    ax.grid(linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    _save(fig, path, description)


def save_synthetic_overview(task, levels, path, description: str | None = None) -> None:
    """True low/high curves with the sampled points of a generated instance."""
    lo, hi = task.domain
    grid = np.linspace(lo, hi, 400)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(grid, task.low_fn(grid), color=_COLORS[1], linewidth=1.2,
            label="low-fidelity function")
    ax.plot(grid, task.high_fn(grid), color=_COLORS[0], linewidth=1.6,
            label="high-fidelity function")
    low, high = levels[0], levels[-1]
    ax.scatter(low.x[:, 0], low.y, color=_COLORS[1], marker="D", s=30,
               label=f"low-fidelity sample (n={low.n})")
    ax.scatter(high.x[:, 0], high.y, color=_COLORS[0], marker="o", s=36,
               label=f"high-fidelity sample (n={high.n})")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.grid(linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    _save(fig, path, description)
