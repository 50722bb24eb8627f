"""Tracking, energy and comfort indexes of a closed-loop run.

Inputs enter the energy and comfort sums in kN, and every sum is unweighted
over control steps, so two reports are comparable only at equal duration and dt.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .scenarios import ScenarioLog

KN = 1000.0


@dataclass(frozen=True)
class PerformanceReport:
    tracking: float
    energy: float
    comfort: float
    total: float
    min_gap_m: float
    min_margin_m: float
    violations: int

    def to_dict(self) -> dict:
        out = asdict(self)
        # JSON has no NaN; runs without a lead have no gap statistics
        for key in ("min_gap_m", "min_margin_m"):
            if math.isnan(out[key]):
                out[key] = None
        return out


def _u(u) -> np.ndarray:
    return np.asarray(u.u if isinstance(u, ScenarioLog) else u, dtype=float)


def tracking_index(log, v_ref: float) -> float:
    """Sum over steps of ``|v - v_ref|``; accepts a log or a speed array."""
    v = np.asarray(log.v_ego if isinstance(log, ScenarioLog) else log, dtype=float)
    if v.size == 0:
        raise ValueError("tracking_index: empty log")
    return float(np.sum(np.abs(v - v_ref)))


def energy_index(log) -> float:
    """Sum of positive (traction) input in kN; braking is free."""
    u = _u(log)
    if u.size == 0:
        raise ValueError("energy_index: empty log")
    return float(np.sum(np.maximum(0.0, u / KN)))


def comfort_index(log) -> float:
    """Sum of absolute input changes between consecutive steps, in kN."""
    u = _u(log)
    if u.size < 2:
        raise ValueError("comfort_index needs at least two steps")
    return float(np.sum(np.abs(np.diff(u / KN))))


def performance_report(log: ScenarioLog, v_ref: float) -> PerformanceReport:
    tracking = tracking_index(log, v_ref)
    energy = energy_index(log)
    comfort = comfort_index(log)
    margin = log.gap - log.d_safe
    has_gap = np.any(~np.isnan(log.gap))
    has_margin = np.any(~np.isnan(margin))
    return PerformanceReport(
        tracking=tracking,
        energy=energy,
        comfort=comfort,
        total=tracking + energy + comfort,
        min_gap_m=float(np.nanmin(log.gap)) if has_gap else math.nan,
        min_margin_m=float(np.nanmin(margin)) if has_margin else math.nan,
        violations=int(np.sum(margin < 0)) if has_margin else 0,
    )


def compare_reports(with_grade: PerformanceReport, without_grade: PerformanceReport, log_a: ScenarioLog, log_b: ScenarioLog) -> dict:
    """Side-by-side table of both runs, one row per index."""
    if len(log_a) != len(log_b) or not math.isclose(log_a.dt, log_b.dt):
        raise ValueError("reports are comparable only for runs of equal length and step")
    a, b = with_grade.to_dict(), without_grade.to_dict()
    return {key: {"with_grade": a[key], "without_grade": b[key]} for key in a}
