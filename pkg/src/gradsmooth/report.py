"""Render benchmark tables and optimization trajectories as figures.

The CSV files are the primary interface; these helpers turn them into
matplotlib heatmaps (one panel per distribution, strategies by
covariates, log color scale) and trajectory plots written next to the
delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import INVALID_CELL

__all__ = ["bench_heatmap_figure", "trajectory_figure"]


def _ordered_unique(items):
    seen = []
    for item in items:
        if item not in seen:
            seen.append(item)
    return seen


def bench_heatmap_figure(header, rows, path):
    """One heatmap panel per distribution; darker is smaller error."""
    distributions = _ordered_unique(r["distribution"] for r in rows)
    strategies = _ordered_unique(r["strategy"] for r in rows)
    anti_flags = _ordered_unique(r["antithetic"] for r in rows)
    covariates = _ordered_unique(r["covariate"] for r in rows)
    columns = [(a, c) for a in anti_flags for c in covariates]

    fig, axes = plt.subplots(
        1,
        len(distributions),
        figsize=(1.1 + 2.1 * len(distributions), 1.2 + 0.55 * len(strategies)),
        squeeze=False,
    )
    finite = [
        r["mean_l2"]
        for r in rows
        if r["mean_l2"] != INVALID_CELL and r["mean_l2"] > 0
    ]
    vmin = min(finite) if finite else 1e-6
    vmax = max(finite) if finite else 1.0
    norm = matplotlib.colors.LogNorm(vmin=vmin, vmax=max(vmax, vmin * 1.0001))

    for ax, dist in zip(axes[0], distributions):
        grid = np.full((len(strategies), len(columns)), np.nan)
        for r in rows:
            if r["distribution"] != dist or r["mean_l2"] == INVALID_CELL:
                continue
            i = strategies.index(r["strategy"])
            j = columns.index((r["antithetic"], r["covariate"]))
            grid[i, j] = r["mean_l2"]
        masked = np.ma.masked_invalid(grid)
        ax.imshow(masked, cmap="viridis_r", norm=norm, aspect="auto")
        ax.set_title(dist, fontsize=9)
        ax.set_xticks(range(len(columns)))
        ax.set_xticklabels(
            [f"{c}\n{'anti' if a == 'true' else 'reg'}" for a, c in columns],
            fontsize=6,
        )
        ax.set_yticks(range(len(strategies)))
        ax.set_yticklabels(strategies, fontsize=6)
        for i in range(len(strategies)):
            for j in range(len(columns)):
                if not np.isnan(grid[i, j]):
                    ax.text(
                        j, i, f"{grid[i, j]:.3g}", ha="center", va="center", fontsize=5
                    )
                else:
                    ax.text(j, i, INVALID_CELL, ha="center", va="center", fontsize=6)
    title = f"{header.get('function', '?')} n={header.get('n', '?')}, s={header.get('samples', '?')}"
    fig.suptitle(f"mean L2 error vs oracle: {title}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=180)
    plt.close(fig)
    return path


def trajectory_figure(steps, xs, fxs, gammas, path):
    """Objective value and smoothing scale over the descent."""
    fig, (ax_f, ax_g) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax_f.plot(steps, fxs, lw=1.2)
    ax_f.set_ylabel("f(x)")
    xs = np.asarray(xs)
    if xs.ndim == 2 and xs.shape[1] == 1:
        twin = ax_f.twinx()
        twin.plot(steps, xs[:, 0], lw=0.8, color="tab:orange", alpha=0.7)
        twin.set_ylabel("x", color="tab:orange")
    ax_g.plot(steps, gammas, lw=1.2, color="tab:green")
    ax_g.set_ylabel("gamma")
    ax_g.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=180)
    plt.close(fig)
    return path
