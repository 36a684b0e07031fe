"""Relative-likelihood budget for additive logit shifts.

A shift ``c`` is added to every logit row before the softmax.  The change in
training log-likelihood ``delta_loglik(c)`` is concave and invariant along the
all-ones direction; restricting to single-class shifts ``t * e_k`` gives a
strictly concave scalar function whose super-level set at ``log(alpha)`` is
an interval.  Its endpoints are found by bracketed bisection.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .core import (
    AlphaLevel,
    DecalibrationModel,
    DegenerateClass,
    InvalidConfig,
    LabeledLogits,
    MODES,
    NotConverged,
    ShiftEndpoints,
    SingleClassData,
    SolverBudgetExceeded,
    ValidationError,
    as_alpha,
)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for the scalar root finder.

    ``tol_delta`` is an absolute bound on ``|delta - log(alpha)|`` at returned
    endpoints; when left as ``None`` it scales with the training size as
    ``1e-10 * N``.
    """

    tol_delta: Optional[float] = None
    tol_t: float = 1e-12
    clamp: float = 10000.0
    max_iter: int = 200
    bracket_init: float = 1.0

    def __post_init__(self):
        for name in ("tol_t", "clamp", "bracket_init"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.tol_delta is not None and not self.tol_delta > 0:
            raise InvalidConfig("tol_delta must be positive")
        if self.max_iter < 60:
            raise InvalidConfig("max_iter must be at least 60")

    def delta_tol(self, n: int) -> float:
        return self.tol_delta if self.tol_delta is not None else 1e-10 * n


def log_softmax_shift(z, c) -> np.ndarray:
    """log softmax(z + c), computed with max-subtraction."""
    v = np.asarray(z, dtype=float) + np.asarray(c, dtype=float)
    return v - logsumexp(v, axis=-1, keepdims=True)


def delta_loglik(data: LabeledLogits, c) -> float:
    """Training log-likelihood change caused by adding ``c`` to every row."""
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return 0.0
    z = data.z
    # log p_y(c) - log p_y(0) = c_y - [lse(z + c) - lse(z)]
    per_row = c[data.labels] - (logsumexp(z + c, axis=1) - logsumexp(z, axis=1))
    return math.fsum(per_row)


def delta_loglik_grad(data: LabeledLogits, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    p = np.exp(log_softmax_shift(data.z, c))
    return data.class_counts.astype(float) - p.sum(axis=0)


def delta_loglik_hess(data: LabeledLogits, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    p = np.exp(log_softmax_shift(data.z, c))
    return p.T @ p - np.diag(p.sum(axis=0))


def _softplus(x):
    return np.logaddexp(0.0, x)


def delta_loglik_1d(data: LabeledLogits, k: int, t: float) -> float:
    """Delta log-likelihood along the class-``k`` axis, ``delta_loglik(t e_k)``."""
    if t == 0.0:
        return 0.0
    r = data.class_log_odds[:, k]
    d = _softplus(r + t) - _softplus(r)
    return math.fsum(np.append(-d, data.class_counts[k] * t))


def delta_loglik_1d_deriv(data: LabeledLogits, k: int, t: float) -> float:
    r = data.class_log_odds[:, k]
    return float(data.class_counts[k]) - math.fsum(expit(r + t))


def _delta_limit(data: LabeledLogits, k: int, side: int) -> float:
    # only finite for degenerate classes: N_k = 0 as t -> -inf, N_k = N as t -> +inf
    r = data.class_log_odds[:, k]
    if side < 0:
        return math.fsum(_softplus(r))
    return math.fsum(_softplus(-r))


def family_max_1d(data: LabeledLogits, k: int, cfg: SolverConfig = SolverConfig()):
    """Maximizer of ``delta_loglik_1d`` by bisection on its decreasing derivative.

    Returns ``(t_star, value)``.
    """
    nk = int(data.class_counts[k])
    if nk == 0 or nk == data.n:
        raise DegenerateClass(
            f"class {k + 1} has N_k={nk} of N={data.n}; no interior maximizer"
        )
    tol = cfg.delta_tol(data.n)

    def g(t):
        return delta_loglik_1d_deriv(data, k, t)

    g0 = g(0.0)
    if abs(g0) <= tol:
        return 0.0, 0.0
    direction = 1.0 if g0 > 0 else -1.0
    lo, hi = 0.0, direction * cfg.bracket_init
    while direction * g(hi) > 0:
        if abs(hi) >= cfg.clamp:
            raise SolverBudgetExceeded(f"maximizer for class {k + 1} lies beyond the clamp")
        lo, hi = hi, min(2.0 * abs(hi), cfg.clamp) * direction
    # invariant: direction * g(lo) > 0 >= direction * g(hi)
    best = None
    for _ in range(cfg.max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if best is None or abs(gm) < abs(best[1]):
            best = (mid, gm)
        if abs(gm) <= tol:
            break
        if direction * gm > 0:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= cfg.tol_t:
            break
    t_star, gm = best
    if abs(gm) > tol:
        raise SolverBudgetExceeded(
            f"class {k + 1}: derivative residual {abs(gm):.3g} exceeds tol {tol:.3g}"
        )
    return t_star, delta_loglik_1d(data, k, t_star)


def _bisect_boundary(f, inner: float, outer: float, cfg: SolverConfig):
    """Shrink [inner, outer] around the sign change of ``f`` (f(inner) >= 0 > f(outer)).

    Returns the feasible-side end and its residual.
    """
    fi = f(inner)
    for _ in range(cfg.max_iter):
        if abs(outer - inner) <= cfg.tol_t:
            break
        mid = 0.5 * (inner + outer)
        if mid == inner or mid == outer:
            break
        fm = f(mid)
        if fm >= 0:
            inner, fi = mid, fm
        else:
            outer = mid
    return inner, abs(fi)


class RootFindCounter:
    """Thread-safe tally of scalar root-find invocations."""

    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def tick(self):
        with self._lock:
            self.value += 1


def _solve_side(data, k, side, log_alpha, anchor, ref, cfg, tol, counter=None):
    """Root of delta_1d(t) - ref = log_alpha on one side of ``anchor``.

    ``side`` is +1 for the upper endpoint and -1 for the lower one.
    """
    nk = int(data.class_counts[k])
    # limiting slope on this side is 0 for a degenerate class: never crosses
    if (side < 0 and nk == 0) or (side > 0 and nk == data.n):
        return side * math.inf, None
    if counter is not None:
        counter.tick()

    def f(t):
        return delta_loglik_1d(data, k, t) - ref - log_alpha

    step = cfg.bracket_init
    inner = anchor
    while True:
        t = anchor + side * step
        if abs(t) >= cfg.clamp:
            t = side * cfg.clamp
        ft = f(t)
        if ft < 0:
            break
        if abs(t) >= cfg.clamp:
            return side * math.inf, None
        inner = t
        step *= 2.0
    root, resid = _bisect_boundary(f, inner, t, cfg)
    if resid > tol:
        raise SolverBudgetExceeded(
            f"class {k + 1}: residual {resid:.3g} exceeds tol {tol:.3g} at t={root!r}"
        )
    return root, resid


def _feasible_anchor(data, k, side, level, cfg):
    """Walk toward ``side`` until delta_1d(t) >= level; None if only the clamp does it."""
    t, step = 0.0, cfg.bracket_init
    while delta_loglik_1d(data, k, t) < level:
        if abs(t) >= cfg.clamp:
            return None
        t = side * min(step, cfg.clamp)
        step *= 2.0
    return t


def solve_endpoints(
    data: LabeledLogits,
    k: int,
    alpha,
    mode: str = "base",
    cfg: SolverConfig = SolverConfig(),
    t_star: Optional[float] = None,
    counter: Optional[RootFindCounter] = None,
) -> ShiftEndpoints:
    """Endpoints of ``{t : delta_1d(t) - ref >= log(alpha)}`` for class ``k``.

    ``ref`` is 0 in base mode and the class-axis maximum in family-mle mode.
    """
    alpha = as_alpha(alpha)
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if alpha.alpha == 0.0:
        return ShiftEndpoints(-math.inf, math.inf)
    tol = cfg.delta_tol(data.n)
    log_alpha = alpha.log_budget
    anchor, ref = 0.0, 0.0
    if mode == "family-mle":
        nk = int(data.class_counts[k])
        if nk == 0 or nk == data.n:
            # supremum sits at t -> -inf (N_k = 0) or +inf (N_k = N)
            side = -1 if nk == 0 else 1
            ref = _delta_limit(data, k, side)
            if alpha.alpha == 1.0:
                return ShiftEndpoints(side * math.inf, side * math.inf)
            anchor = _feasible_anchor(data, k, side, ref + log_alpha, cfg)
            if anchor is None:
                return ShiftEndpoints(-math.inf, math.inf)
            root, resid = _solve_side(data, k, -side, log_alpha, anchor, ref, cfg, tol, counter)
            if side < 0:
                return ShiftEndpoints(-math.inf, root, None, resid)
            return ShiftEndpoints(root, math.inf, resid, None)
        if t_star is None:
            t_star, ref = family_max_1d(data, k, cfg)
        else:
            ref = delta_loglik_1d(data, k, t_star)
        anchor = t_star
        if alpha.alpha == 1.0:
            return ShiftEndpoints(t_star, t_star, 0.0, 0.0)
    lo, rlo = _solve_side(data, k, -1, log_alpha, anchor, ref, cfg, tol, counter)
    hi, rhi = _solve_side(data, k, +1, log_alpha, anchor, ref, cfg, tol, counter)
    return ShiftEndpoints(lo, hi, rlo, rhi)


def _thread_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("CREDAL_DECAL_THREADS")
    return max(1, int(env)) if env else 1


def fit(
    data: LabeledLogits,
    alphas: Sequence,
    mode: str = "base",
    cfg: SolverConfig = SolverConfig(),
    workers: Optional[int] = None,
) -> DecalibrationModel:
    """Solve the two scalar endpoint problems for every (alpha, class) pair."""
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    counts = data.class_counts
    if np.count_nonzero(counts) < 2:
        raise SingleClassData("training labels contain fewer than two distinct classes")
    levels = sorted({as_alpha(a).alpha for a in alphas})
    if not levels:
        raise ValidationError("no alpha levels given")
    K = data.k

    t_star = None
    if mode == "family-mle":
        t_star = tuple(
            family_max_1d(data, k, cfg)[0] if 0 < counts[k] < data.n else
            (-math.inf if counts[k] == 0 else math.inf)
            for k in range(K)
        )

    def task(pair):
        a, k = pair
        ts = t_star[k] if t_star is not None and math.isfinite(t_star[k]) else None
        return pair, solve_endpoints(data, k, a, mode, cfg, t_star=ts, counter=counter)

    counter = RootFindCounter()
    pairs = [(a, k) for a in levels for k in range(K)]
    n_workers = _thread_count(workers)
    if n_workers == 1:
        results = [task(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(task, pairs))
    endpoints = dict(results)
    return DecalibrationModel(
        K=K,
        N=data.n,
        mode=mode,
        alphas=tuple(levels),
        endpoints=endpoints,
        clamp=cfg.clamp,
        tol=cfg.delta_tol(data.n),
        class_counts=tuple(int(c) for c in counts),
        t_star=t_star,
        n_root_finds=counter.value,
    )


def solver_config_for(model: DecalibrationModel) -> SolverConfig:
    return SolverConfig(tol_delta=model.tol, clamp=model.clamp)


# --- multivariate upper bound ------------------------------------------------

_BARRIER_SCHEDULE = (1.0, 0.1, 0.01, 0.001, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9)


def _hyperplane_basis(K: int) -> np.ndarray:
    """Orthonormal K x (K-1) basis of {c : sum(c) = 0}."""
    q, _ = np.linalg.qr(np.eye(K) - 1.0 / K)
    return q[:, : K - 1]


def _family_mle(data: LabeledLogits, B: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Damped Newton maximization of delta_loglik over the hyperplane."""
    if np.any(data.class_counts == 0):
        raise DegenerateClass("family maximizer is at infinity when a class is absent")
    u = np.zeros(B.shape[1])
    val = 0.0
    for _ in range(max_iter):
        c = B @ u
        g = B.T @ delta_loglik_grad(data, c)
        if np.linalg.norm(g) <= 1e-10 * max(1, data.n):
            return c
        H = B.T @ delta_loglik_hess(data, c) @ B
        step = -np.linalg.solve(H, g)
        s = 1.0
        while True:
            cand = delta_loglik(data, B @ (u + s * step))
            if cand >= val + 1e-4 * s * float(g @ step) or s < 1e-12:
                break
            s *= 0.5
        u, val = u + s * step, cand
    raise NotConverged("family maximizer did not converge")


def upper_bound_multivariate(
    data: LabeledLogits,
    z,
    k: int,
    alpha,
    cfg: SolverConfig = SolverConfig(),
    mode: str = "base",
    max_inner: int = 500,
) -> float:
    """Largest class-``k`` probability over all shifts within the budget.

    Log-barrier interior method on the identifiability hyperplane with damped
    Newton inner steps and backtracking; the barrier weight runs from 1 down
    to 1e-9 so the optimality gap in log-probability is at most 1e-9.
    """
    alpha = as_alpha(alpha)
    if alpha.alpha <= 0.0:
        raise ValidationError("multivariate bound requires alpha > 0")
    if np.count_nonzero(data.class_counts) < 2:
        raise SingleClassData("training labels contain fewer than two distinct classes")
    z = np.asarray(z, dtype=float)
    K = data.k
    B = _hyperplane_basis(K)
    log_alpha = alpha.log_budget
    ntol = 1e-12 * max(1, data.n)

    def logpk(c):
        return float(log_softmax_shift(z, c)[k])

    ref = 0.0
    c0 = np.zeros(K)
    if mode == "family-mle":
        c0 = _family_mle(data, B)
        ref = delta_loglik(data, c0)
    elif mode != "base":
        raise ValidationError(f"unknown mode {mode!r}")

    def slack(c):
        return delta_loglik(data, c) - ref - log_alpha

    if slack(c0) <= ntol:
        # budget leaves no room around the start; move to the family maximizer
        c_mle = _family_mle(data, B)
        if slack(c_mle) <= ntol:
            return math.exp(logpk(c_mle))
        c0 = c_mle

    u = B.T @ c0
    offset = c0 - B @ u  # component along the ones direction, irrelevant but kept exact

    def point(u_):
        return B @ u_ + offset

    def phi(u_, mu):
        c = point(u_)
        s = slack(c)
        if not s > 0:
            return -math.inf
        return logpk(c) + mu * math.log(s)

    for mu in _BARRIER_SCHEDULE:
        for _ in range(max_inner):
            c = point(u)
            p = np.exp(log_softmax_shift(z, c))
            s = slack(c)
            gd = delta_loglik_grad(data, c)
            g_full = -p + mu * gd / s
            g_full[k] += 1.0
            g = B.T @ g_full
            H_full = (np.outer(p, p) - np.diag(p)) + mu * (
                delta_loglik_hess(data, c) / s - np.outer(gd, gd) / s**2
            )
            H = B.T @ H_full @ B
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = g
            decrement = float(g @ step)
            if not decrement > 0:
                step, decrement = g, float(g @ g)
            if decrement / 2 <= 1e-14:
                break
            f0 = phi(u, mu)
            t = 1.0
            while t > 1e-10:
                cand = u + t * step
                if phi(cand, mu) >= f0 + 0.25 * t * decrement:
                    break
                t *= 0.5
            else:
                # no ascent left at floating-point resolution
                break
            u = cand
    c = point(u)
    g_obj = -np.exp(log_softmax_shift(z, c))
    g_obj[k] += 1.0
    g_obj = B.T @ g_obj
    normal = B.T @ delta_loglik_grad(data, c)
    nn = float(normal @ normal)
    # stationarity along the constraint boundary: drop the component a multiplier can absorb
    tangential = g_obj - (float(g_obj @ normal) / nn) * normal if nn > 0 else g_obj
    resid = float(np.linalg.norm(tangential))
    if resid > 1e-6:
        raise NotConverged(f"tangential gradient norm {resid:.3g} after barrier schedule")
    return math.exp(logpk(c))
