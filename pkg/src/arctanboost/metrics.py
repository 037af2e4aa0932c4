"""Evaluation metrics for predicted quantiles.

Coverage intervals are closed, so a target equal to an endpoint is covered.
Reliability fractions count strictly-below targets, ``y < q_hat``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .loss import QuantileLevels


class MetricsError(ValueError):
    pass


def _check(y, preds, levels):
    y = np.asarray(y, dtype=float).ravel()
    p = np.asarray(preds, dtype=float)
    if p.ndim != 2:
        raise MetricsError(f"predictions must be 2-D, got shape {p.shape}")
    if p.shape[0] != y.shape[0]:
        raise MetricsError(f"{y.shape[0]} targets but {p.shape[0]} prediction rows")
    if levels is not None and p.shape[1] != len(levels):
        raise MetricsError(f"{p.shape[1]} prediction columns but {len(levels)} levels")
    return y, p


def coverage_and_width(y, preds, levels, lo_tau: float = 0.05, hi_tau: float = 0.95) -> tuple[float, float]:
    """Percent of targets inside ``[q_lo, q_hi]`` and the mean of ``q_hi - q_lo``."""
    y, p = _check(y, preds, levels)
    if not lo_tau < hi_tau:
        raise MetricsError(f"lo_tau {lo_tau} must be below hi_tau {hi_tau}")
    lv = QuantileLevels(levels)
    lo = p[:, lv.position(lo_tau)]
    hi = p[:, lv.position(hi_tau)]
    inside = (y >= lo) & (y <= hi)
    return 100.0 * float(np.mean(inside)), float(np.mean(hi - lo))


def average_pinball(y, preds, levels) -> float:
    y, p = _check(y, preds, levels)
    tau = np.asarray(levels, dtype=float)[None, :]
    u = y[:, None] - p
    return float(np.mean(np.where(u >= 0, tau * u, (tau - 1.0) * u)))


def crossing_percentage(preds, levels=None) -> float:
    """Percent of adjacent level pairs with ``q_j > q_{j+1}`` (ties do not count)."""
    p = np.asarray(preds, dtype=float)
    if p.ndim != 2:
        raise MetricsError(f"predictions must be 2-D, got shape {p.shape}")
    if levels is not None and p.shape[1] != len(levels):
        raise MetricsError(f"{p.shape[1]} prediction columns but {len(levels)} levels")
    if p.shape[1] < 2:
        raise MetricsError("crossing percentage needs at least two levels")
    return 100.0 * float(np.mean(p[:, :-1] > p[:, 1:]))


def count_crossings(preds) -> int:
    p = np.asarray(preds, dtype=float)
    return int(np.sum(p[:, :-1] > p[:, 1:]))


def reliability_points(y, preds, levels) -> list[tuple[float, float]]:
    y, p = _check(y, preds, levels)
    fracs = np.mean(y[:, None] < p, axis=0)
    return [(float(t), float(f)) for t, f in zip(levels, fracs)]


@dataclass
class EvalReport:
    coverage_pct: float
    mean_width: float
    avg_pinball: float
    crossing_pct: float
    n: int
    lo_tau: float = 0.05
    hi_tau: float = 0.95
    reliability: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reliability"] = [{"tau": t, "fraction": f} for t, f in self.reliability]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    CSV_FIELDS = ("n", "lo_tau", "hi_tau", "coverage_pct", "mean_width", "avg_pinball", "crossing_pct")

    def csv_header(self) -> str:
        return ",".join(self.CSV_FIELDS)

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow([repr(getattr(self, k)) for k in self.CSV_FIELDS])
        return buf.getvalue()

    def reliability_csv(self) -> str:
        lines = ["tau,fraction"] + [f"{t!r},{f!r}" for t, f in self.reliability]
        return "\n".join(lines) + "\n"


def evaluate(y, preds, levels: Sequence[float], lo_tau: float = 0.05, hi_tau: float = 0.95) -> EvalReport:
    y, p = _check(y, preds, levels)
    cov, width = coverage_and_width(y, p, levels, lo_tau, hi_tau)
    cross = crossing_percentage(p, levels) if p.shape[1] >= 2 else 0.0
    return EvalReport(
        coverage_pct=cov,
        mean_width=width,
        avg_pinball=average_pinball(y, p, levels),
        crossing_pct=cross,
        n=int(y.shape[0]),
        lo_tau=float(lo_tau),
        hi_tau=float(hi_tau),
        reliability=reliability_points(y, p, levels),
    )
