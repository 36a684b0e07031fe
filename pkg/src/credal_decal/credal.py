"""Box credal sets from fitted shift intervals."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .core import (
    SIMPLEX_TOL,
    BoxCredalSet,
    DecalibrationModel,
    EmptyBox,
    LengthMismatch,
    LogitMatrix,
    ValidationError,
    as_alpha,
    log_odds_one_vs_rest,
)

NEST_TOL = 1e-12


def predict_intervals(model: DecalibrationModel, logits, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Raw (lower, upper) bound matrices for a batch of test logits.

    Bounds are the class-k probabilities after shifting logit k alone by
    the fitted endpoint; an infinite endpoint maps to 0 or 1.
    """
    z = logits.values if isinstance(logits, LogitMatrix) else np.atleast_2d(
        np.asarray(logits, dtype=float)
    )
    if z.shape[1] != model.K:
        raise LengthMismatch(f"test logits have K={z.shape[1]}, model has K={model.K}")
    t_minus, t_plus = model.shifts(alpha)
    r = log_odds_one_vs_rest(z)
    return expit(r + t_minus), expit(r + t_plus)


def _box(model, lo, hi) -> BoxCredalSet:
    try:
        return BoxCredalSet(lo, hi, reachable=False)
    except EmptyBox as e:
        if model.mode == "family-mle":
            # each class axis is centred on its own maximizer; for K >= 3 those
            # points need not add up to a distribution when alpha is near 1
            raise EmptyBox(f"{e} (family-mle intervals around per-class maximizers)") from None
        raise


def predict_box(model: DecalibrationModel, z, alpha) -> BoxCredalSet:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValidationError("predict_box takes a single logit row")
    lo, hi = predict_intervals(model, z[None, :], alpha)
    return _box(model, lo[0], hi[0])


def predict_boxes(model: DecalibrationModel, logits, alpha) -> list[BoxCredalSet]:
    lo, hi = predict_intervals(model, logits, alpha)
    return [_box(model, a, b) for a, b in zip(lo, hi)]


def tighten_bounds(lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coherent bounds l' = max(l, 1 - sum_{j!=k} u_j), u' = min(u, 1 - sum_{j!=k} l_j).

    Works row-wise on 2-D input.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    L = lower.sum(axis=-1, keepdims=True)
    U = upper.sum(axis=-1, keepdims=True)
    if np.any(L > 1.0 + SIMPLEX_TOL) or np.any(U < 1.0 - SIMPLEX_TOL):
        raise EmptyBox("interval bounds do not meet the simplex")
    lo = np.maximum(lower, 1.0 - (U - upper))
    hi = np.minimum(upper, 1.0 - (L - lower))
    lo = np.clip(lo, 0.0, 1.0)
    hi = np.clip(hi, 0.0, 1.0)
    # within-tolerance boxes can cross by rounding; keep lo <= hi
    lo = np.minimum(lo, hi)
    return lo, hi


def tighten_reachable(box: BoxCredalSet) -> BoxCredalSet:
    if box.reachable:
        return box
    lo, hi = tighten_bounds(box.lower, box.upper)
    return BoxCredalSet(lo, hi, reachable=True)


def contains(box: BoxCredalSet, p, tol: float = SIMPLEX_TOL) -> bool:
    p = np.asarray(p, dtype=float)
    if p.shape != box.lower.shape:
        raise LengthMismatch(f"vector of length {p.shape} vs box with K={box.n_classes}")
    return bool(np.all(p >= box.lower - tol) and np.all(p <= box.upper + tol))


def contains_rows(lower: np.ndarray, upper: np.ndarray, P: np.ndarray, tol: float = SIMPLEX_TOL):
    """Vectorized membership of each row of ``P`` in the matching box row."""
    return np.all((P >= lower - tol) & (P <= upper + tol), axis=1)


def is_nested(inner: BoxCredalSet, outer: BoxCredalSet, tol: float = NEST_TOL) -> bool:
    if inner.n_classes != outer.n_classes:
        raise LengthMismatch("boxes have different class counts")
    return bool(
        np.all(inner.lower >= outer.lower - tol) and np.all(inner.upper <= outer.upper + tol)
    )


def can_be_argmax(box: BoxCredalSet, j: int) -> bool:
    """Whether some p in the box (on the simplex) has p_j >= p_i for every i.

    Fix p_j = v.  The others need l_i <= v and their mass must fit:
    v + sum_{i!=j} l_i <= 1 <= v + sum_{i!=j} min(u_i, v).  Both sides grow
    with v, so the best candidate is the largest v the left inequality allows.
    """
    lo, hi = box.lower, box.upper
    others = np.arange(box.n_classes) != j
    rest_lo = math.fsum(lo[others])
    v = min(hi[j], 1.0 - rest_lo)
    if v < lo[j] - SIMPLEX_TOL or np.any(lo[others] > v + SIMPLEX_TOL):
        return False
    return v + math.fsum(np.minimum(hi[others], v)) >= 1.0 - SIMPLEX_TOL
