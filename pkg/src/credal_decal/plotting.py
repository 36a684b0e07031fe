"""Matplotlib renderings of sweep summaries and spider plots (raster/PDF reports)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import SpiderPlotSpec  # noqa: E402
from .metrics import EvaluationSummary  # noqa: E402


def _save(fig, path):
    path = Path(path)
    kw = {"metadata": {"Date": None}} if path.suffix.lower() in (".svg", ".pdf") else {}
    fig.savefig(path, bbox_inches="tight", **kw)
    plt.close(fig)


def plot_pareto(summary: EvaluationSummary, path, label: str = "decalibration"):
    """Coverage against efficiency, one marker per alpha."""
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    eff = summary.column("efficiency")
    cov = summary.column("coverage")
    if any(c is None for c in cov):
        ax.plot(summary.column("alpha"), eff, "o-", color="C0")
        ax.set_xlabel("alpha")
        ax.set_ylabel("efficiency")
    else:
        ax.plot(eff, cov, "o-", color="C0", label=label)
        for r in summary.rows:
            ax.annotate(f"{r.alpha:g}", (r.efficiency, r.coverage), textcoords="offset points",
                        xytext=(4, 4), fontsize=8)
        ax.set_xlabel("efficiency")
        ax.set_ylabel("coverage")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="lower left", frameon=False)
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_ood(summary: EvaluationSummary, path):
    aucs = summary.column("auroc")
    if any(a is None for a in aucs):
        raise ValueError("summary has no AUROC column")
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(summary.column("alpha"), aucs, "s-", color="C3")
    ax.axhline(0.5, color="0.6", lw=1, ls="--")
    ax.set_xlabel("alpha")
    ax.set_ylabel(f"AUROC ({summary.measure})")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_spider(spec: SpiderPlotSpec, path):
    K = spec.intervals.n_classes
    theta = np.array([math.pi / 2 - 2 * math.pi * k / K for k in range(K)])
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    for k in range(K):
        ax.plot([theta[k]] * 2, [spec.intervals.lower[k], spec.intervals.upper[k]],
                color="C0", lw=6, solid_capstyle="butt")
    if spec.mle is not None:
        ax.plot(np.append(theta, theta[0]), np.append(spec.mle, spec.mle[0]), color="C3", lw=1.5)
    if spec.gt is not None:
        keep = spec.gt > 0
        ax.scatter(theta[keep], spec.gt[keep], color="C2", zorder=3, s=20)
    ax.set_xticks(theta)
    ax.set_xticklabels(spec.class_names)
    ax.set_ylim(0, spec.radial_max)
    _save(fig, path)
