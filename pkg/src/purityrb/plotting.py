"""Figure rendering for simulation and scan outputs.

Figures are drawn with the object-oriented matplotlib API (no pyplot), so
rendering works headless and never touches global state.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=150, bbox_inches="tight")


def render_decay_figure(dataset, path, theory=None, fit_result=None, title: str = "") -> None:
    """Error-bar plot of a decay dataset with optional model overlays."""
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    ax.errorbar(
        dataset.lengths, dataset.mean, yerr=dataset.stderr,
        fmt="o", ms=3.5, capsize=2, lw=1, label="simulated",
    )
    if theory is not None:
        ax.plot(dataset.lengths, theory, "-", lw=1.2, label="model")
    if fit_result is not None:
        grid = np.linspace(dataset.lengths.min(), dataset.lengths.max(), 200)
        p = fit_result.params
        if fit_result.model == "tp":
            curve = p["A"] + p["B"] * p["u"] ** (grid - 1.0)
            label = f"fit: u = {p['u']:.4f}"
        elif fit_result.model == "td":
            curve = (p["A"] * p["lambda_plus"] ** (grid - 1.0)
                     + p["B"] * p["lambda_minus"] ** (grid - 1.0))
            label = f"fit: rates {p['lambda_plus']:.4f}, {p['lambda_minus']:.4f}"
        else:
            curve = p["C"] * p["S"] ** (grid - 1.0)
            label = f"fit: S = {p['S']:.4f}"
        ax.plot(grid, curve, "--", lw=1.2, label=label)
    ax.set_xlabel("sequence length m")
    ax.set_ylabel("mean squared expectation" if dataset.kind == "purity" else "mean expectation")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)


def render_scan_figures(rows: np.ndarray, rank_path, scatter_path) -> None:
    """Distribution of unitarity by Kraus rank, and unitarity vs fidelity."""
    ranks = sorted(set(int(r) for r in rows[:, 0]))

    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    ax.violinplot(
        [rows[rows[:, 0] == r, 2] for r in ranks],
        positions=ranks, showmedians=True, widths=0.7,
    )
    ax.set_xlabel("Kraus rank")
    ax.set_ylabel("unitarity")
    ax.set_xticks(ranks)
    _save(fig, rank_path)

    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    for r in ranks:
        sel = rows[rows[:, 0] == r]
        ax.plot(1.0 - sel[:, 3], sel[:, 2], ".", ms=2.5, alpha=0.5, label=f"rank {r}")
    ax.set_xlabel("average gate fidelity")
    ax.set_ylabel("unitarity")
    ax.legend(frameon=False, markerscale=3)
    _save(fig, scatter_path)
