"""Matplotlib report figures written as SVG.

Figures are rendered with the Agg canvas, a fixed SVG hash salt and no
date metadata so that repeated runs give identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .body import boundary_embedding  # noqa: E402

STYLE = {
    "svg.hashsalt": "convexflow",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def trace_figure(trace, path, title: str = "") -> Path:
    """Volume, entropy and drift against time for one flow trace."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(3, 1, figsize=(5, 6), sharex=True)
        step = trace.column("step")
        A = trace.column("A_p")
        drift = trace.column("drift")
        axes[0].plot(step, trace.column("V"), color="C0")
        axes[0].set_ylabel("V")
        axes[0].set_yscale("log")
        axes[1].plot(step, A, color="C1", label="A")
        B = trace.column("B_p")
        if np.any(np.isfinite(B)):
            axes[1].plot(step, B, color="C2", linestyle="--", label="B")
            axes[1].legend(loc="best", frameon=False)
        axes[1].set_ylabel("entropy")
        positive = drift > 0
        axes[2].semilogy(step[positive], drift[positive], color="C3")
        axes[2].set_ylabel("drift")
        axes[2].set_xlabel("step")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def boundary_figure(bodies, path, labels=None, title: str = "") -> Path:
    """Overlay of planar boundaries (first and last emphasized)."""
    bodies = list(bodies)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        colors = plt.cm.viridis(np.linspace(0.0, 1.0, max(len(bodies), 2)))
        for i, K in enumerate(bodies):
            x = boundary_embedding(K).points
            x = np.vstack([x, x[:1]])
            label = None if labels is None else labels[i]
            ax.plot(x[:, 0], x[:, 1], color=colors[i], label=label,
                    linewidth=1.6 if i in (0, len(bodies) - 1) else 0.6)
        ax.plot([0.0], [0.0], marker="+", color="k")
        ax.set_aspect("equal")
        if labels is not None:
            ax.legend(loc="best", frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def stability_figure(eps, dist, gamma: float, path) -> Path:
    """Scatter of Hausdorff distance against the volume deficit with the fitted bound."""
    eps = np.asarray(eps, dtype=float)
    dist = np.asarray(dist, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.loglog(eps, dist, ".", color="C0", label="bodies")
        grid = np.geomspace(eps.min(), eps.max(), 100)
        ax.loglog(grid, gamma * grid ** (1.0 / 3.0), color="C3", label=f"{gamma:.3g} eps^(1/3)")
        ax.set_xlabel("eps")
        ax.set_ylabel("distance to disk")
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def measure_figure(groups: dict, path, ylabel: str, threshold: float | None = None) -> Path:
    """One measured quantity per record, one marker series per group label."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for i, (label, values) in enumerate(groups.items()):
            values = np.asarray(values, dtype=float)
            ax.plot(np.arange(values.size), values, ".", color=f"C{i}", label=str(label))
        if threshold is not None:
            ax.axhline(threshold, color="k", linestyle="--", linewidth=0.8)
        ax.set_xlabel("record")
        ax.set_ylabel(ylabel)
        if len(groups) > 1:
            ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _save(fig, path)
