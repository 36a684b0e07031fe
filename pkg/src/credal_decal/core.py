"""Validated domain types and the error hierarchy shared by every module.

Arrays held by these types are copied on construction and marked read-only,
so instances can be shared freely between worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

SIMPLEX_TOL = 1e-9


class CredalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CredalError, ValueError):
    """An input violates a documented invariant."""


class NotNormalized(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class EmptyBox(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyList(ValidationError):
    pass


class UnknownAlpha(ValidationError):
    pass


class SingleClassData(ValidationError):
    pass


class DegenerateClass(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaVersionMismatch(ValidationError):
    pass


class SolverError(CredalError, RuntimeError):
    """A numerical routine failed to certify its result."""


class SolverBudgetExceeded(SolverError):
    pass


class NotConverged(SolverError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LogitMatrix:
    """Dense N x K matrix of finite logits (N >= 1, K >= 2)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2:
            raise ValidationError(f"logits must be a 2-D matrix, got shape {v.shape}")
        if v.shape[0] < 1:
            raise ValidationError("logit matrix needs at least one row")
        if v.shape[1] < 2:
            raise ValidationError(f"need K >= 2 classes, got K={v.shape[1]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("logits must be finite (found NaN or inf)")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_rows


@dataclass(frozen=True, eq=False)
class LabeledLogits:
    """Training logits with 0-based integer labels.

    External formats use 1-based labels; convert with :meth:`from_one_based`.
    """

    logits: LogitMatrix
    labels: np.ndarray

    def __post_init__(self):
        if not isinstance(self.logits, LogitMatrix):
            object.__setattr__(self, "logits", LogitMatrix(self.logits))
        y = np.asarray(self.labels)
        if y.ndim != 1:
            raise ValidationError("labels must be a 1-D vector")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValidationError("labels must be integers")
        y = y.astype(np.int64)
        if y.shape[0] != self.logits.n_rows:
            raise LengthMismatch(
                f"{y.shape[0]} labels for {self.logits.n_rows} logit rows"
            )
        K = self.logits.n_classes
        if np.any((y < 0) | (y >= K)):
            bad = int(y[(y < 0) | (y >= K)][0])
            raise OutOfRange(f"label {bad + 1} outside 1..{K}")
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_one_based(cls, logits, labels) -> "LabeledLogits":
        return cls(LogitMatrix(logits), np.asarray(labels, dtype=np.int64) - 1)

    @property
    def z(self) -> np.ndarray:
        return self.logits.values

    @property
    def n(self) -> int:
        return self.logits.n_rows

    @property
    def k(self) -> int:
        return self.logits.n_classes

    @cached_property
    def class_counts(self) -> np.ndarray:
        c = np.bincount(self.labels, minlength=self.k)
        c.flags.writeable = False
        return c

    @cached_property
    def class_log_odds(self) -> np.ndarray:
        """N x K matrix of log(p_k / (1 - p_k)) under the unshifted model."""
        return log_odds_one_vs_rest(self.z)


def log_odds_one_vs_rest(z: np.ndarray) -> np.ndarray:
    """Per-class log-odds ``z_k - logsumexp_{j != k} z_j`` for each row.

    Exact for the argmax class of each row (its complement is summed
    directly); every other class has p_k <= 1/2 so ``log(-expm1(log p_k))``
    is well conditioned.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n, K = z.shape
    rows = np.arange(n)
    top = np.argmax(z, axis=1)
    zmax = z[rows, top]
    shifted = np.exp(z - zmax[:, None])
    total = shifted.sum(axis=1)
    lse = zmax + np.log(total)
    logp = z - lse[:, None]
    with np.errstate(divide="ignore"):
        r = logp - np.log(-np.expm1(logp))
    rest = z - zmax[:, None]
    rest[rows, top] = -np.inf
    # log domain, so the top-class odds stay finite when exp(rest) underflows
    r[rows, top] = -logsumexp(rest, axis=1)
    return r


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(validate_probability_vector(self.p)))

    def __len__(self) -> int:
        return self.p.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.p, dtype=dtype)


def validate_probability_vector(p) -> np.ndarray:
    """Check that ``p`` is a length K >= 2 distribution; never renormalizes."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValidationError(f"probability vector needs length K >= 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any((p < 0.0) | (p > 1.0)):
        raise OutOfRange(f"entries must lie in [0, 1]: {p.tolist()}")
    s = math.fsum(p)
    if abs(s - 1.0) > SIMPLEX_TOL:
        raise NotNormalized(f"entries sum to {s!r}, not 1")
    return p


@dataclass(frozen=True)
class ProbabilityInterval:
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
            raise OutOfRange(f"interval [{lo}, {hi}] not inside [0, 1]")
        if lo > hi:
            raise ValidationError(f"interval lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True, eq=False)
class BoxCredalSet:
    """Class-wise probability intervals intersected with the simplex."""

    lower: np.ndarray
    upper: np.ndarray
    reachable: bool = False

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.shape[0] < 2:
            raise ValidationError("box bounds must be two length-K vectors, K >= 2")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("box bounds must be finite")
        if np.any(lo < 0.0) or np.any(hi > 1.0):
            raise OutOfRange("box bounds must lie in [0, 1]")
        if np.any(lo > hi):
            raise ValidationError("box has an interval with lower > upper")
        if math.fsum(lo) > 1.0 + SIMPLEX_TOL or math.fsum(hi) < 1.0 - SIMPLEX_TOL:
            raise EmptyBox(
                f"box misses the simplex: sum(lower)={math.fsum(lo)!r}, "
                f"sum(upper)={math.fsum(hi)!r}"
            )
        if self.reachable:
            L, U = math.fsum(lo), math.fsum(hi)
            if np.any(lo < 1.0 - (U - hi) - SIMPLEX_TOL) or np.any(
                hi > 1.0 - (L - lo) + SIMPLEX_TOL
            ):
                raise ValidationError("box flagged reachable but bounds are not coherent")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @classmethod
    def from_intervals(cls, intervals: Iterable[ProbabilityInterval], reachable=False):
        intervals = list(intervals)
        return cls(
            np.array([iv.lower for iv in intervals]),
            np.array([iv.upper for iv in intervals]),
            reachable,
        )

    @classmethod
    def full(cls, K: int) -> "BoxCredalSet":
        return cls(np.zeros(K), np.ones(K), reachable=True)

    @property
    def n_classes(self) -> int:
        return self.lower.shape[0]

    @property
    def intervals(self) -> list[ProbabilityInterval]:
        return [ProbabilityInterval(a, b) for a, b in zip(self.lower, self.upper)]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class AlphaLevel:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 <= a <= 1.0):
            raise OutOfRange(f"alpha must lie in [0, 1], got {a}")
        object.__setattr__(self, "alpha", a)

    @property
    def log_budget(self) -> float:
        return -math.inf if self.alpha == 0.0 else math.log(self.alpha)


def as_alpha(a) -> AlphaLevel:
    return a if isinstance(a, AlphaLevel) else AlphaLevel(a)


@dataclass(frozen=True)
class ShiftEndpoints:
    t_minus: float
    t_plus: float
    residual_minus: Optional[float] = None
    residual_plus: Optional[float] = None

    def __post_init__(self):
        if math.isnan(self.t_minus) or math.isnan(self.t_plus):
            raise ValidationError("shift endpoints must not be NaN")
        if self.t_minus > self.t_plus:
            raise ValidationError(f"t_minus {self.t_minus} > t_plus {self.t_plus}")

    def contains(self, t: float) -> bool:
        return self.t_minus <= t <= self.t_plus


MODES = ("base", "family-mle")


@dataclass(frozen=True, eq=False)
class DecalibrationModel:
    """Fitted per-alpha, per-class shift intervals.

    ``endpoints[(alpha, k)]`` holds the interval for 0-based class ``k``.
    """

    K: int
    N: int
    mode: str
    alphas: tuple[float, ...]
    endpoints: dict
    clamp: float
    tol: float
    class_counts: Optional[tuple[int, ...]] = None
    t_star: Optional[tuple[float, ...]] = None
    n_root_finds: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        alphas = tuple(sorted(float(as_alpha(a).alpha) for a in self.alphas))
        if len(set(alphas)) != len(alphas):
            raise ValidationError("duplicate alpha levels")
        object.__setattr__(self, "alphas", alphas)
        for a in alphas:
            for k in range(self.K):
                if (a, k) not in self.endpoints:
                    raise ValidationError(f"missing endpoints for alpha={a}, class {k + 1}")
        object.__setattr__(self, "endpoints", dict(self.endpoints))

    def shifts(self, alpha) -> tuple[np.ndarray, np.ndarray]:
        """Return (t_minus, t_plus) vectors of length K for a fitted alpha."""
        a = float(as_alpha(alpha).alpha)
        if a not in self.alphas:
            raise UnknownAlpha(f"alpha={a} was not fitted; fitted levels: {list(self.alphas)}")
        eps = [self.endpoints[(a, k)] for k in range(self.K)]
        return (
            np.array([e.t_minus for e in eps], dtype=float),
            np.array([e.t_plus for e in eps], dtype=float),
        )

    def is_nested(self) -> bool:
        for a1, a2 in zip(self.alphas[1:], self.alphas[:-1]):
            for k in range(self.K):
                inner, outer = self.endpoints[(a1, k)], self.endpoints[(a2, k)]
                if inner.t_minus < outer.t_minus or inner.t_plus > outer.t_plus:
                    return False
        return True


@dataclass(frozen=True)
class UncertaintyReport:
    """Entropy-based and zero-one-loss uncertainty for one credal set (nats)."""

    au: float
    eu_entropy: float
    eu_zero_one: float
    heuristic: bool = False
    witness_max: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    witness_min: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def tu(self) -> float:
        return self.au + self.eu_entropy
