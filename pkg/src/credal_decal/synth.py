"""Synthetic classification tasks with exact ground-truth conditionals.

Class means sit on a regular simplex with pairwise distance ``separation``;
features are isotropic unit-variance Gaussians around them with equal
priors, so the Bayes posterior is a softmax of ``x @ means.T``.  Training
labels are drawn from that posterior.  The "model" under evaluation sees the
true log-posterior plus a fixed bias and per-logit Gaussian noise.

Randomness comes from numpy's Philox-4x64 counter-based generator keyed by
``(seed, stream)``; each quantity below uses its own stream id, so outputs
depend only on the seed and the config.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .core import InvalidConfig, LabeledLogits, LogitMatrix

_MASK64 = (1 << 64) - 1

STREAM_TRAIN_X = 1
STREAM_TRAIN_Y = 2
STREAM_TRAIN_NOISE = 3
STREAM_TEST_X = 4
STREAM_TEST_NOISE = 5
STREAM_OOD_DIR = 6
STREAM_OOD_X = 7
STREAM_OOD_NOISE = 8


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK64, int(stream) & _MASK64]))


@dataclass(frozen=True)
class SynthConfig:
    K: int = 3
    N_train: int = 1000
    N_test: int = 1000
    d: Optional[int] = None
    separation: float = 2.0
    miscal_bias: Optional[tuple[float, ...]] = None
    miscal_noise: float = 0.0
    seed: int = 0
    N_ood: Optional[int] = None
    ood_shift: float = 3.0

    def __post_init__(self):
        if self.K < 2:
            raise InvalidConfig("K must be at least 2")
        if self.N_train < 1 or self.N_test < 1:
            raise InvalidConfig("sample counts must be positive")
        if self.N_ood is not None and self.N_ood < 1:
            raise InvalidConfig("N_ood must be positive")
        d = self.K - 1 if self.d is None else int(self.d)
        if d < self.K - 1:
            raise InvalidConfig(f"d={d} too small for a regular simplex of {self.K} means")
        object.__setattr__(self, "d", d)
        if not self.separation > 0:
            raise InvalidConfig("separation must be positive")
        if not self.miscal_noise >= 0:
            raise InvalidConfig("miscal_noise must be non-negative")
        bias = (0.0,) * self.K if self.miscal_bias is None else tuple(float(b) for b in self.miscal_bias)
        if len(bias) != self.K:
            raise InvalidConfig(f"miscal_bias has {len(bias)} entries for K={self.K}")
        object.__setattr__(self, "miscal_bias", bias)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown synth config keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("miscal_bias") is not None:
            d["miscal_bias"] = tuple(d["miscal_bias"])
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["miscal_bias"] = list(self.miscal_bias)
        return out


@dataclass(frozen=True, eq=False)
class SynthData:
    train: LabeledLogits
    test_logits: LogitMatrix
    test_gts: np.ndarray
    ood_logits: LogitMatrix
    train_gts: np.ndarray = field(repr=False)
    means: np.ndarray = field(repr=False)

    def __iter__(self):
        yield from (self.train, self.test_logits, self.test_gts, self.ood_logits)


def simplex_means(K: int, d: int, separation: float) -> np.ndarray:
    """K points in R^d with all pairwise distances equal to ``separation``."""
    centered = np.eye(K) - 1.0 / K
    basis, _ = np.linalg.qr(centered)
    coords = centered @ basis[:, : K - 1]
    means = np.zeros((K, d))
    means[:, : K - 1] = coords * (separation / np.sqrt(2.0))
    return means


def _features(rng, means, n):
    K, d = means.shape
    y = rng.integers(0, K, size=n)
    return means[y] + rng.standard_normal((n, d))


def true_log_posterior(x: np.ndarray, means: np.ndarray) -> np.ndarray:
    # equal norms and priors: the quadratic terms cancel
    return log_softmax(x @ means.T, axis=1)


def _model_logits(cfg, x, means, noise_rng):
    logits = true_log_posterior(x, means) + np.asarray(cfg.miscal_bias)
    if cfg.miscal_noise > 0:
        logits = logits + cfg.miscal_noise * noise_rng.standard_normal(logits.shape)
    return logits


def _sample_labels(rng, P):
    u = rng.random(P.shape[0])
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    return (u[:, None] > cdf).sum(axis=1)


def generate(config: SynthConfig) -> SynthData:
    cfg = config
    seed = cfg.seed
    means = simplex_means(cfg.K, cfg.d, cfg.separation)

    x_tr = _features(stream_rng(seed, STREAM_TRAIN_X), means, cfg.N_train)
    p_tr = softmax(x_tr @ means.T, axis=1)
    y_tr = _sample_labels(stream_rng(seed, STREAM_TRAIN_Y), p_tr)
    z_tr = _model_logits(cfg, x_tr, means, stream_rng(seed, STREAM_TRAIN_NOISE))

    x_te = _features(stream_rng(seed, STREAM_TEST_X), means, cfg.N_test)
    gts = softmax(x_te @ means.T, axis=1)
    z_te = _model_logits(cfg, x_te, means, stream_rng(seed, STREAM_TEST_NOISE))

    direction = stream_rng(seed, STREAM_OOD_DIR).standard_normal(cfg.d)
    direction /= np.linalg.norm(direction)
    n_ood = cfg.N_ood if cfg.N_ood is not None else cfg.N_test
    x_ood = _features(stream_rng(seed, STREAM_OOD_X), means, n_ood)
    x_ood = x_ood + cfg.ood_shift * cfg.separation * direction
    z_ood = _model_logits(cfg, x_ood, means, stream_rng(seed, STREAM_OOD_NOISE))

    return SynthData(
        train=LabeledLogits(LogitMatrix(z_tr), y_tr),
        test_logits=LogitMatrix(z_te),
        test_gts=gts,
        ood_logits=LogitMatrix(z_ood),
        train_gts=p_tr,
        means=means,
    )
