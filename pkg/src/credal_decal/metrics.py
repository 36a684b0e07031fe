"""Coverage, efficiency, AUROC and the alpha sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import (
    BoxCredalSet,
    DecalibrationModel,
    EmptyList,
    LengthMismatch,
    LogitMatrix,
    ValidationError,
)
from .credal import contains_rows, predict_intervals, tighten_bounds
from .uncertainty import eu_scores


def _bounds(boxes) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(boxes, tuple) and len(boxes) == 2 and isinstance(boxes[0], np.ndarray):
        return np.atleast_2d(boxes[0]), np.atleast_2d(boxes[1])
    boxes = list(boxes)
    if not boxes:
        raise EmptyList("no boxes given")
    return np.stack([b.lower for b in boxes]), np.stack([b.upper for b in boxes])


def coverage(boxes, gts) -> float:
    """Fraction of instances whose ground-truth distribution lies in its box.

    ``boxes`` is a list of :class:`BoxCredalSet` or a ``(lower, upper)`` pair
    of N x K arrays.
    """
    lo, hi = _bounds(boxes)
    P = np.stack([np.asarray(g, dtype=float) for g in gts]) if len(gts) else np.empty((0,))
    if P.shape[0] != lo.shape[0]:
        raise LengthMismatch(f"{lo.shape[0]} boxes but {P.shape[0]} ground truths")
    if P.shape[1] != lo.shape[1]:
        raise LengthMismatch("ground truths and boxes disagree on K")
    if lo.shape[0] == 0:
        raise EmptyList("no instances")
    return float(np.mean(contains_rows(lo, hi, P)))


def efficiency(boxes, tightened: bool = False) -> float:
    """One minus the mean per-class interval width."""
    lo, hi = _bounds(boxes)
    if lo.shape[0] == 0:
        raise EmptyList("no boxes given")
    if tightened:
        lo, hi = tighten_bounds(lo, hi)
    return float(1.0 - np.mean(hi - lo))


def auroc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUROC with average ranks for ties (positives = OOD)."""
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyList("AUROC needs at least one positive and one negative score")
    ranks = rankdata(np.concatenate([pos, neg]))
    n_pos, n_neg = pos.size, neg.size
    u = math.fsum(ranks[:n_pos]) - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    coverage: Optional[float]
    efficiency: float
    auroc: Optional[float] = None


@dataclass(frozen=True)
class EvaluationSummary:
    rows: tuple[SweepRow, ...]
    n_instances: int
    measure: str = "eu_entropy"

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: r.alpha))
        for r in rows:
            for name in ("coverage", "efficiency", "auroc"):
                v = getattr(r, name)
                if v is not None and not 0.0 <= v <= 1.0:
                    raise ValidationError(f"{name}={v} outside [0, 1] at alpha={r.alpha}")
        object.__setattr__(self, "rows", rows)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def pareto_sweep(
    model: DecalibrationModel,
    test_logits,
    gts=None,
    ood_logits=None,
    measure: str = "eu_entropy",
    tightened: bool = False,
    alphas: Optional[Sequence[float]] = None,
) -> EvaluationSummary:
    """Coverage / efficiency (and optional OOD AUROC) for each fitted alpha."""
    levels = model.alphas if alphas is None else sorted(alphas)
    rows = []
    n = None
    for a in levels:
        lo, hi = predict_intervals(model, test_logits, a)
        n = lo.shape[0]
        cov = coverage((lo, hi), gts) if gts is not None else None
        eff = efficiency((lo, hi), tightened=tightened)
        auc = None
        if ood_logits is not None:
            olo, ohi = predict_intervals(model, ood_logits, a)
            auc = auroc(eu_scores(olo, ohi, measure), eu_scores(lo, hi, measure))
        rows.append(SweepRow(a, cov, eff, auc))
    return EvaluationSummary(tuple(rows), n_instances=n or 0, measure=measure)


def argmax_accuracy(logits, labels) -> float:
    """Share of rows whose largest logit sits at the (0-based) label."""
    z = logits.values if isinstance(logits, LogitMatrix) else np.atleast_2d(np.asarray(logits))
    y = np.asarray(labels)
    if y.shape[0] != z.shape[0]:
        raise LengthMismatch(f"{z.shape[0]} rows but {y.shape[0]} labels")
    return float(np.mean(np.argmax(z, axis=1) == y))
