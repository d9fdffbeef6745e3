"""Matplotlib renderings of fit traces and evaluation reports.

All figures go straight to files (Agg backend); nothing opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .curvefit import FitTrace, Point2
from .evaluate import COMBO_HEADERS, EvalReport

__all__ = ["plot_fit_trace", "render_report_figures"]


def plot_fit_trace(points: Sequence[Point2], trace: FitTrace, path) -> None:
    """Scatter the points and overlay each stage's fitted curve."""
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    grid = np.linspace(xs.min(), xs.max(), 200)
    fig, ax = plt.subplots(figsize=(7, 5))
    cmap = plt.get_cmap("viridis")
    n_stages = max(len(trace.stages), 1)
    for i, stage in enumerate(trace.stages):
        ax.plot(
            grid,
            stage.model.predict(grid),
            color=cmap(i / max(n_stages - 1, 1)),
            lw=1.2,
            label=f"stage {stage.index} (SSR {stage.residual:.3g})",
        )
    ax.scatter(xs, ys, color="black", zorder=5, s=25)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("Stagewise fit")
    ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_confusion(ax, cell: dict, title: str) -> None:
    confusion = cell["confusion"]
    truths = sorted(confusion)
    preds = [*truths, "Reject"]
    matrix = np.array([[confusion[t][p] for p in preds] for t in truths], dtype=float)
    ax.imshow(matrix, cmap="Blues", vmin=0)
    ax.set_xticks(range(len(preds)), preds, rotation=30, ha="right", fontsize=8)
    ax.set_yticks(range(len(truths)), truths, fontsize=8)
    ax.set_xlabel("predicted", fontsize=8)
    ax.set_ylabel("true", fontsize=8)
    for i in range(len(truths)):
        for j in range(len(preds)):
            ax.text(j, i, int(matrix[i, j]), ha="center", va="center", fontsize=8)
    ax.set_title(title, fontsize=9)


def render_report_figures(report: EvalReport, outdir) -> list[Path]:
    """Write an accuracy bar chart plus one confusion figure per classifier.

    Returns the created file paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    combos = report.metadata["combos"]
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    x = np.arange(len(combos))
    width = 0.35
    for offset, clf in zip((-width / 2, width / 2), ("KNN", "HMM")):
        acc = [report.cells[clf][c]["accuracy_pct"] for c in combos]
        bars = ax.bar(x + offset, acc, width, label=clf)
        ax.bar_label(bars, fmt="%.1f", fontsize=8)
    ax.set_xticks(x, [COMBO_HEADERS[c] for c in combos], fontsize=8)
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Classifier accuracy by feature combination")
    ax.legend()
    fig.tight_layout()
    path = outdir / "accuracy_by_combo.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    for clf in ("KNN", "HMM"):
        fig, axes = plt.subplots(1, len(combos), figsize=(4 * len(combos), 3.6))
        if len(combos) == 1:
            axes = [axes]
        for ax, combo in zip(axes, combos):
            _plot_confusion(ax, report.cells[clf][combo], COMBO_HEADERS[combo])
        fig.suptitle(f"{clf} confusion (test split)")
        fig.tight_layout()
        path = outdir / f"confusion_{clf.lower()}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
