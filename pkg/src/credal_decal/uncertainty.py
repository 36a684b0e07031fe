"""Entropy extrema, zero-one-loss epistemic uncertainty and uncertainty ranking."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import entr

from .core import SIMPLEX_TOL, BoxCredalSet, EmptyBox, UncertaintyReport, ValidationError
from .credal import can_be_argmax, tighten_reachable

EXACT_MAX_K = 15
MEASURES = ("eu_entropy", "eu_zero_one")


def shannon_entropy(p) -> float:
    return float(math.fsum(entr(np.asarray(p, dtype=float))))


def _reachable(box: BoxCredalSet) -> BoxCredalSet:
    return box if box.reachable else tighten_reachable(box)


def max_entropy(box: BoxCredalSet) -> tuple[float, np.ndarray]:
    """Water-filling: p_i = clip(level, l_i, u_i) with the level chosen so p sums to 1."""
    box = _reachable(box)
    lo, hi = box.lower, box.upper
    knots = np.unique(np.concatenate([lo, hi]))
    mass = np.array([np.clip(b, lo, hi).sum() for b in knots])
    idx = int(np.searchsorted(mass, 1.0))
    if idx == 0:
        level = knots[0]
    elif idx >= len(knots):
        level = knots[-1]
    else:
        b0, b1 = knots[idx - 1], knots[idx]
        m0, m1 = mass[idx - 1], mass[idx]
        level = b1 if m1 == m0 else b0 + (1.0 - m0) * (b1 - b0) / (m1 - m0)
    p = np.clip(level, lo, hi)
    return shannon_entropy(p), p


@lru_cache(maxsize=None)
def _bound_patterns(m: int) -> np.ndarray:
    """All 2**m rows of {0, 1} choices (0 = lower bound, 1 = upper bound)."""
    return ((np.arange(2**m)[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)


def _vertices(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Extreme points of {p in simplex : lo <= p <= hi}.

    A vertex has every coordinate but at most one sitting at a bound; the free
    coordinate absorbs the remaining mass.
    """
    K = lo.shape[0]
    pats = _bound_patterns(K - 1)
    out = []
    for i in range(K):
        rest = np.arange(K) != i
        vals = np.where(pats, hi[rest], lo[rest])
        resid = 1.0 - vals.sum(axis=1)
        ok = (resid >= lo[i] - SIMPLEX_TOL) & (resid <= hi[i] + SIMPLEX_TOL)
        if not np.any(ok):
            continue
        V = np.empty((int(ok.sum()), K))
        V[:, rest] = vals[ok]
        V[:, i] = np.clip(resid[ok], lo[i], hi[i])
        out.append(V)
    if not out:
        raise EmptyBox("box has no extreme points on the simplex")
    return np.concatenate(out)


def _greedy_concentrate(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    p = lo.copy()
    remaining = 1.0 - lo.sum()
    for i in np.argsort(-hi, kind="stable"):
        if remaining <= 0:
            break
        add = min(hi[i] - lo[i], remaining)
        p[i] += add
        remaining -= add
    return p


def min_entropy(box: BoxCredalSet, exact: Optional[bool] = None) -> tuple[float, np.ndarray, bool]:
    """Lowest Shannon entropy over the box; returns (value, witness, is_heuristic).

    Entropy is concave, so the minimum sits at a vertex.  For K above
    ``EXACT_MAX_K`` the vertex count K * 2**(K-1) is too large and a greedy
    mass-concentration point is used instead; its entropy can only be above
    the true minimum.
    """
    box = _reachable(box)
    lo, hi = box.lower, box.upper
    if exact is None:
        exact = box.n_classes <= EXACT_MAX_K
    if not exact:
        p = _greedy_concentrate(lo, hi)
        return shannon_entropy(p), p, True
    V = _vertices(lo, hi)
    H = entr(V).sum(axis=1)
    i = int(np.argmin(H))
    return shannon_entropy(V[i]), V[i], False


def _max_gap(lo, hi, k, j) -> float:
    """max over the box of p_k - p_j for k != j (box assumed reachable)."""
    rest = np.ones(lo.shape[0], dtype=bool)
    rest[[k, j]] = False
    rest_lo, rest_hi = lo[rest].sum(), hi[rest].sum()
    pj = lo[j]
    pk = 1.0 - pj - rest_lo
    if pk > hi[k]:
        # surplus goes to the other classes first; raising p_j costs twice as much
        surplus = pk - hi[k]
        pk = hi[k]
        surplus -= min(surplus, rest_hi - rest_lo)
        pj += surplus
    return pk - pj


def zero_one_eu(box: BoxCredalSet) -> float:
    """Largest top-probability loss from predicting with another member's argmax."""
    box = _reachable(box)
    lo, hi = box.lower, box.upper
    K = box.n_classes
    best = 0.0
    for j in range(K):
        if not can_be_argmax(box, j):
            continue
        for k in range(K):
            if k != j:
                best = max(best, _max_gap(lo, hi, k, j))
    return float(min(max(best, 0.0), 1.0))


def uncertainty_report(box: BoxCredalSet, exact: Optional[bool] = None) -> UncertaintyReport:
    box = _reachable(box)
    tu, w_max = max_entropy(box)
    au, w_min, heuristic = min_entropy(box, exact)
    au = min(au, tu)
    return UncertaintyReport(
        au=au,
        eu_entropy=max(tu - au, 0.0),
        eu_zero_one=zero_one_eu(box),
        heuristic=heuristic,
        witness_max=w_max,
        witness_min=w_min,
    )


def eu_score(box: BoxCredalSet, measure: str = "eu_entropy") -> float:
    if measure == "eu_entropy":
        box = _reachable(box)
        return max(max_entropy(box)[0] - min_entropy(box)[0], 0.0)
    if measure == "eu_zero_one":
        return zero_one_eu(box)
    raise ValidationError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def eu_scores(lower: np.ndarray, upper: np.ndarray, measure: str = "eu_entropy") -> np.ndarray:
    return np.array([eu_score(BoxCredalSet(a, b), measure) for a, b in zip(lower, upper)])


def rank_by_uncertainty(
    boxes: Sequence[BoxCredalSet], measure: str = "eu_entropy", m: Optional[int] = None
) -> list[int]:
    """Indices of the ``m`` most uncertain boxes, largest first; ties go to the lower index."""
    n = len(boxes)
    m = n if m is None else m
    if not 0 <= m <= n:
        raise ValidationError(f"cannot select {m} of {n} instances")
    scores = [eu_score(b, measure) for b in boxes]
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    return order[:m]
