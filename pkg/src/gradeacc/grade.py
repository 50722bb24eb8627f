"""Position-indexed road grade profiles."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Malformed elevation/grade data or CSV header."""


@dataclass(frozen=True, eq=False)
class GradeProfile:
    positions: np.ndarray
    grades: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.positions, dtype=float)
        th = np.asarray(self.grades, dtype=float)
        if s.ndim != 1 or s.shape != th.shape:
            raise InputError("positions and grades must be 1-D arrays of equal length")
        if s.size < 2:
            raise InputError("a grade profile needs at least 2 samples")
        if np.any(np.diff(s) <= 0):
            raise InputError("positions must be strictly increasing")
        if np.any(np.abs(th) >= math.pi / 2):
            raise InputError("grades must satisfy |theta| < pi/2")
        s.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "positions", s)
        object.__setattr__(self, "grades", th)

    @property
    def extent(self) -> tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.positions.tolist(), self.grades.tolist()))

    def __call__(self, s):
        return grade_at(self, s)

    @cached_property
    def _lists(self):
        return self.positions.tolist(), self.grades.tolist()

    def scalar(self, s: float) -> float:
        """Same as ``grade_at`` for one float, without numpy call overhead."""
        xs, ys = self._lists
        if s <= xs[0]:
            return ys[0]
        if s >= xs[-1]:
            return ys[-1]
        i = bisect.bisect_right(xs, s)
        slope = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
        return slope * (s - xs[i - 1]) + ys[i - 1]

    @classmethod
    def flat(cls, length: float = 1.0e5) -> "GradeProfile":
        return cls(np.array([0.0, length]), np.zeros(2))

    @classmethod
    def constant(cls, theta: float, length: float = 1.0e5) -> "GradeProfile":
        return cls(np.array([-length, length]), np.full(2, float(theta)))


def grade_at(profile: GradeProfile, s):
    """Linear interpolation of grade, clamped to the end values outside the mapped extent.

    Accepts a scalar or an array of positions.
    """
    out = np.interp(s, profile.positions, profile.grades)
    return float(out) if np.ndim(out) == 0 else out


def preview_over_horizon(profile: GradeProfile, s0: float, v0: float, N: int, dt: float) -> np.ndarray:
    """Grades at the positions reached by holding ``v0`` for ``k*dt``, k = 0..N."""
    if N < 1 or dt <= 0 or v0 < 0:
        raise ValueError("preview_over_horizon needs N >= 1, dt > 0, v0 >= 0")
    return np.interp(s0 + v0 * dt * np.arange(N + 1), profile.positions, profile.grades)


def from_elevation(samples, smoothing_window: int = 1) -> GradeProfile:
    """Grade from (position, elevation) samples by finite differences.

    Interior points use a central difference, the ends one-sided ones, then a
    centred moving average of width ``smoothing_window`` (shrinking at the ends).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError("elevation samples must be (position, elevation) pairs")
    s, z = arr[:, 0], arr[:, 1]
    if s.size < 3:
        raise InputError("need at least 3 elevation samples")
    if np.any(np.diff(s) <= 0):
        raise InputError("elevation positions must be strictly increasing (duplicate or unsorted position)")
    if smoothing_window < 1 or smoothing_window % 2 == 0:
        raise InputError(f"smoothing_window must be a positive odd integer, got {smoothing_window}")
    if smoothing_window > s.size:
        raise InputError(f"smoothing_window {smoothing_window} exceeds sample count {s.size}")

    slope = np.empty_like(s)
    slope[1:-1] = (z[2:] - z[:-2]) / (s[2:] - s[:-2])
    slope[0] = (z[1] - z[0]) / (s[1] - s[0])
    slope[-1] = (z[-1] - z[-2]) / (s[-1] - s[-2])
    theta = np.arctan(slope)

    if smoothing_window > 1:
        half = smoothing_window // 2
        smoothed = np.empty_like(theta)
        for i in range(theta.size):
            lo, hi = max(0, i - half), min(theta.size, i + half + 1)
            smoothed[i] = theta[lo:hi].mean()
        theta = smoothed
    return GradeProfile(s, theta)


def synthetic_sine(amplitude: float, wavelength: float, length: float, spacing: float, phase: float = 0.0) -> GradeProfile:
    if not abs(amplitude) < math.pi / 2 or wavelength <= 0 or spacing <= 0 or length <= 0:
        raise ValueError("synthetic_sine: need |amplitude| < pi/2 and positive wavelength, length, spacing")
    n = int(math.floor(length / spacing + 1e-9)) + 1
    s = np.arange(n) * spacing
    if s[-1] < length:
        s = np.append(s, length)
    return GradeProfile(s, amplitude * np.sin(2 * math.pi * s / wavelength + phase))


def _read_two_column_csv(path, header: tuple[str, str]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got is None or tuple(h.strip() for h in got) != header:
            raise InputError(f"{path}: expected header {','.join(header)!r}, got {','.join(got or [])!r}")
        rows = [(float(a), float(b)) for a, b in reader]
    return np.array(rows, dtype=float).reshape(-1, 2)


def load_elevation_csv(path, smoothing_window: int = 1) -> GradeProfile:
    return from_elevation(_read_two_column_csv(path, ("position_m", "elevation_m")), smoothing_window)


def load_grade_csv(path) -> GradeProfile:
    data = _read_two_column_csv(path, ("position_m", "grade_rad"))
    return GradeProfile(data[:, 0], data[:, 1])


def write_grade_csv(profile: GradeProfile, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["position_m", "grade_rad"])
        for s, th in zip(profile.positions, profile.grades):
            w.writerow([repr(float(s)), repr(float(th))])
