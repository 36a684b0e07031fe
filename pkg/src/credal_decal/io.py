"""CSV / JSON file formats and the credal spider-plot SVG writer.

Logit CSV:         header ``z_1,...,z_K`` with an optional trailing ``y`` (1-based).
Distribution CSV:  header ``p_1,...,p_K``.
Box CSV:           header ``l_1,u_1,...,l_K,u_K``.
Model JSON:        schema tag ``credal-decal/1``; infinite shifts as "-inf"/"inf".
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    BoxCredalSet,
    DecalibrationModel,
    LabeledLogits,
    LogitMatrix,
    ParseError,
    SchemaVersionMismatch,
    ShiftEndpoints,
    ValidationError,
    validate_probability_vector,
)

SCHEMA = "credal-decal/1"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[float]]]]:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as e:
        raise ParseError(f"cannot open {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path} is empty", line=1) from None
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(raw)}", line=lineno
                )
            try:
                rows.append((lineno, [float(c) for c in raw]))
            except ValueError as e:
                raise ParseError(f"non-numeric field: {e}", line=lineno) from None
    if not rows:
        raise ParseError(f"{path} has a header but no data rows", line=2)
    return header, rows


def _check_header(header: Sequence[str], prefix: str, K: int):
    expected = [f"{prefix}_{k}" for k in range(1, K + 1)]
    if list(header[:K]) != expected:
        raise ParseError(f"header must start with {','.join(expected)}; got {','.join(header)}", line=1)


def _logit_columns(header) -> tuple[int, bool]:
    has_y = bool(header) and header[-1] == "y"
    K = len(header) - int(has_y)
    _check_header(header, "z", K)
    return K, has_y


def read_labeled_logits(path) -> LabeledLogits:
    header, rows = _read_rows(path)
    K, has_y = _logit_columns(header)
    if not has_y:
        raise ParseError("training file needs a trailing 'y' label column", line=1)
    Z = np.array([r[:K] for _, r in rows])
    y = np.array([r[K] for _, r in rows])
    for lineno, r in rows:
        lab = r[K]
        if lab != int(lab):
            raise ParseError(f"label {lab} is not an integer", line=lineno)
        if not 1 <= lab <= K:
            raise ValidationError(f"line {lineno}: label {int(lab)} outside 1..{K}")
    return LabeledLogits.from_one_based(Z, y.astype(np.int64))


def read_logits(path) -> LogitMatrix:
    header, rows = _read_rows(path)
    K, _ = _logit_columns(header)
    return LogitMatrix(np.array([r[:K] for _, r in rows]))


def read_distributions(path, renormalize: bool = False) -> np.ndarray:
    header, rows = _read_rows(path)
    K = len(header)
    _check_header(header, "p", K)
    out = np.empty((len(rows), K))
    for i, (lineno, r) in enumerate(rows):
        p = np.array(r)
        if renormalize:
            s = p.sum()
            if not s > 0:
                raise ValidationError(f"line {lineno}: cannot renormalize a row summing to {s}")
            p = p / s
        try:
            out[i] = validate_probability_vector(p)
        except ValidationError as e:
            raise type(e)(f"line {lineno}: {e}") from None
    return out


def write_csv(path, header: Sequence[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_logits(path, logits, labels=None) -> None:
    Z = logits.values if isinstance(logits, LogitMatrix) else np.asarray(logits, dtype=float)
    K = Z.shape[1]
    header = [f"z_{k}" for k in range(1, K + 1)]
    if labels is None:
        write_csv(path, header, (list(map(float, row)) for row in Z))
    else:
        header.append("y")
        write_csv(
            path, header, (list(map(float, row)) + [int(y) + 1] for row, y in zip(Z, labels))
        )


def write_distributions(path, P) -> None:
    P = np.asarray(P, dtype=float)
    write_csv(path, [f"p_{k}" for k in range(1, P.shape[1] + 1)], (list(map(float, r)) for r in P))


def write_boxes(path, lower: np.ndarray, upper: np.ndarray) -> None:
    K = lower.shape[1]
    header = [h for k in range(1, K + 1) for h in (f"l_{k}", f"u_{k}")]
    inter = np.empty((lower.shape[0], 2 * K))
    inter[:, 0::2] = lower
    inter[:, 1::2] = upper
    write_csv(path, header, (list(map(float, r)) for r in inter))


def read_boxes(path) -> tuple[np.ndarray, np.ndarray]:
    header, rows = _read_rows(path)
    if len(header) % 2:
        raise ParseError("box file needs an even number of columns", line=1)
    K = len(header) // 2
    expected = [h for k in range(1, K + 1) for h in (f"l_{k}", f"u_{k}")]
    if header != expected:
        raise ParseError(f"box header must be {','.join(expected)}", line=1)
    A = np.array([r for _, r in rows])
    return A[:, 0::2], A[:, 1::2]


# --- model documents ---------------------------------------------------------


def _enc(x: Optional[float]):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _dec(x):
    if x is None:
        return None
    if isinstance(x, str):
        if x == "inf":
            return math.inf
        if x == "-inf":
            return -math.inf
        raise ParseError(f"unexpected string value {x!r} in model file")
    return float(x)


def model_to_dict(model: DecalibrationModel) -> dict:
    entries = []
    for a in model.alphas:
        for k in range(model.K):
            e = model.endpoints[(a, k)]
            entries.append(
                {
                    "alpha": a,
                    "class": k + 1,
                    "t_minus": _enc(e.t_minus),
                    "t_plus": _enc(e.t_plus),
                    "residual_minus": _enc(e.residual_minus),
                    "residual_plus": _enc(e.residual_plus),
                }
            )
    doc = {
        "schema": SCHEMA,
        "K": model.K,
        "N": model.N,
        "mode": model.mode,
        "tol": model.tol,
        "clamp": model.clamp,
        "alphas": list(model.alphas),
        "class_counts": list(model.class_counts) if model.class_counts else None,
        "t_star": [_enc(t) for t in model.t_star] if model.t_star else None,
        "n_root_finds": model.n_root_finds,
        "endpoints": entries,
    }
    return doc


def model_from_dict(doc: dict) -> DecalibrationModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise SchemaVersionMismatch(
            f"expected schema {SCHEMA!r}, found {doc.get('schema')!r}"
        )
    try:
        endpoints = {}
        for e in doc["endpoints"]:
            key = (float(e["alpha"]), int(e["class"]) - 1)
            endpoints[key] = ShiftEndpoints(
                _dec(e["t_minus"]),
                _dec(e["t_plus"]),
                _dec(e.get("residual_minus")),
                _dec(e.get("residual_plus")),
            )
        t_star = doc.get("t_star")
        return DecalibrationModel(
            K=int(doc["K"]),
            N=int(doc["N"]),
            mode=doc["mode"],
            alphas=tuple(float(a) for a in doc["alphas"]),
            endpoints=endpoints,
            clamp=float(doc["clamp"]),
            tol=float(doc["tol"]),
            class_counts=tuple(doc["class_counts"]) if doc.get("class_counts") else None,
            t_star=tuple(_dec(t) for t in t_star) if t_star else None,
            n_root_finds=int(doc.get("n_root_finds", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ParseError(f"malformed model document: {e!r}") from None


def write_model(model: DecalibrationModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def read_model(path) -> DecalibrationModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    except OSError as e:
        raise ParseError(f"cannot open {path}: {e}") from e
    return model_from_dict(doc)


# --- spider plots ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpiderPlotSpec:
    class_names: tuple[str, ...]
    intervals: BoxCredalSet
    mle: Optional[np.ndarray] = None
    gt: Optional[np.ndarray] = None
    radial_max: float = 1.0
    size_px: int = 640

    def __post_init__(self):
        K = self.intervals.n_classes
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))
        if len(self.class_names) != K:
            raise ValidationError(f"{len(self.class_names)} class names for K={K}")
        for name in ("mle", "gt"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (K,):
                    raise ValidationError(f"{name} overlay must have length {K}")
                object.__setattr__(self, name, v)
        if not self.radial_max > 0 or int(self.size_px) <= 0:
            raise ValidationError("radial_max and size_px must be positive")


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _n(v: float) -> str:
    out = f"{v:.3f}"
    return "0.000" if out == "-0.000" else out


def spider_svg(spec: SpiderPlotSpec) -> str:
    """Standalone SVG text; axis k points at angle 2*pi*k/K clockwise from 12 o'clock."""
    size = int(spec.size_px)
    c = size / 2.0
    R = size * 0.38
    K = spec.intervals.n_classes
    angles = [2.0 * math.pi * k / K for k in range(K)]

    def at(k, value):
        r = R * min(max(value, 0.0), spec.radial_max) / spec.radial_max
        return c + r * math.sin(angles[k]), c - r * math.cos(angles[k])

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
        '<g id="grid" fill="none" stroke="#d0d0d0" stroke-width="1">',
    ]
    for frac in (0.25, 0.5, 0.75, 1.0):
        pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in (at(k, frac * spec.radial_max) for k in range(K)))
        out.append(f'<polygon points="{pts}"/>')
    out.append("</g>")
    out.append('<g id="axes" stroke="#909090" stroke-width="1">')
    for k in range(K):
        x, y = at(k, spec.radial_max)
        out.append(f'<line x1="{_n(c)}" y1="{_n(c)}" x2="{_n(x)}" y2="{_n(y)}"/>')
    out.append("</g>")
    out.append('<g id="labels" font-family="sans-serif" font-size="14" fill="#202020" text-anchor="middle">')
    for k, name in enumerate(spec.class_names):
        x, y = at(k, spec.radial_max)
        lx = c + (x - c) * 1.12
        ly = c + (y - c) * 1.12 + 5
        out.append(f'<text x="{_n(lx)}" y="{_n(ly)}">{_xml_escape(name)}</text>')
    out.append("</g>")
    out.append('<g id="intervals" stroke="#1f77b4" stroke-width="8" stroke-linecap="butt">')
    for k in range(K):
        x1, y1 = at(k, spec.intervals.lower[k])
        x2, y2 = at(k, spec.intervals.upper[k])
        out.append(
            f'<line class="interval" data-class="{k + 1}" x1="{_n(x1)}" y1="{_n(y1)}" '
            f'x2="{_n(x2)}" y2="{_n(y2)}"/>'
        )
    out.append("</g>")
    if spec.mle is not None:
        pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in (at(k, spec.mle[k]) for k in range(K)))
        out.append(
            f'<polygon id="mle" points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>'
        )
    if spec.gt is not None:
        out.append('<g id="ground-truth" fill="#2ca02c">')
        for k in range(K):
            # zero-mass classes get no dot
            if spec.gt[k] > 0:
                x, y = at(k, spec.gt[k])
                out.append(f'<circle data-class="{k + 1}" cx="{_n(x)}" cy="{_n(y)}" r="5"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_spider_svg(spec: SpiderPlotSpec, path) -> None:
    Path(path).write_text(spider_svg(spec))
