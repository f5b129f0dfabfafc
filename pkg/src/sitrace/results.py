"""Verdicts, certificates and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

PASS, FAIL, INCONCLUSIVE, UNTESTABLE = "PASS", "FAIL", "INCONCLUSIVE", "UNTESTABLE"

SCHEMA_VERSION = 1


def judge(residual: float, tol: float, error_bar: float = 0.0) -> str:
    """PASS within tol, INCONCLUSIVE if truncation could explain the excess."""
    if not math.isfinite(residual):
        return FAIL
    if residual <= tol:
        return PASS
    if residual <= tol + error_bar:
        return INCONCLUSIVE
    return FAIL


def combine(verdicts: Sequence[str]) -> str:
    vs = list(verdicts)
    if FAIL in vs:
        return FAIL
    if INCONCLUSIVE in vs:
        return INCONCLUSIVE
    if vs and all(v == UNTESTABLE for v in vs):
        return UNTESTABLE
    return PASS


@dataclass
class Certificate:
    """Outcome of one check: verdict, worst residual and where it happened."""

    name: str
    verdict: str
    residual: float
    tol: float
    error_bar: float = 0.0
    witness: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "residual": self.residual,
            "tol": self.tol,
            "error_bar": self.error_bar,
            "witness": self.witness,
            "details": self.details,
        }


def worst(name: str, residuals: np.ndarray, tol: float, error_bars: np.ndarray | float = 0.0,
          points: np.ndarray | None = None, extra: dict | None = None) -> Certificate:
    """Certificate from a residual array; the verdict is the worst pointwise verdict."""
    res = np.asarray(residuals, dtype=float).ravel()
    bars = np.broadcast_to(np.asarray(error_bars, dtype=float), res.shape) if res.size else np.zeros(0)
    if res.size == 0:
        return Certificate(name, PASS, 0.0, tol, 0.0, {}, dict(extra or {}))
    bad = ~np.isfinite(res)
    fail = bad | (res > tol + bars)
    inc = (~fail) & (res > tol)
    if fail.any():
        verdict = FAIL
        idx = int(np.argmax(np.where(fail, np.where(bad, np.inf, res - bars), -np.inf)))
    elif inc.any():
        verdict = INCONCLUSIVE
        idx = int(np.argmax(np.where(inc, res, -np.inf)))
    else:
        verdict = PASS
        idx = int(np.argmax(res))
    witness = {"index": idx, "residual": float(res[idx]), "error_bar": float(bars[idx])}
    if points is not None:
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(pts.shape[0], -1) if pts.ndim else pts.reshape(1, 1)
        if pts.shape[0] == res.size:
            witness["xi"] = [float(v) for v in pts[idx]]
    return Certificate(name, verdict, float(np.max(np.where(bad, np.inf, res))), tol,
                       float(bars[idx]), witness, dict(extra or {}))


# -- serialization -------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, Certificate):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    return obj


def to_json(report: dict) -> str:
    """Stable JSON: insertion-ordered keys, shortest round-trip floats, LF endings."""
    body = {"schema": SCHEMA_VERSION}
    body.update({k: v for k, v in report.items() if k != "schema"})
    return json.dumps(_plain(body), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def fmt(v: float) -> str:
    return repr(float(v))


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def profile_csv(points: np.ndarray, values, error_bars) -> str:
    pts = np.asarray(points, dtype=float)
    pts = pts.reshape(pts.shape[0], -1)
    header = [f"xi_{i + 1}" for i in range(pts.shape[1])] + ["value", "error_bar"]
    rows = ([*map(float, p), float(v), float(e)] for p, v, e in zip(pts, values, error_bars))
    return to_csv(header, rows)


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]
