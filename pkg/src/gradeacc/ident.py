"""Fit mass, drag area and rolling resistance to recorded speed traces.

The fit is output-error: each candidate parameter set is simulated from the
recorded initial speed over the whole trace and compared with the measured
speeds, rather than regressing one-step accelerations. Air density and g are
held fixed; drag coefficient and frontal area only enter as a product, so that
product is what gets estimated.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import VehicleParams, VehicleState, step_euler
from .grade import InputError

TRACE_HEADER = ("time_s", "u_N", "velocity_mps")


class IdentificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.u) == len(self.v)) or len(self.t) < 2:
            raise ValueError("a trace needs at least two samples of equal-length t, u, v")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for row in zip(self.t, self.u, self.v):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None or tuple(h.strip() for h in got) != TRACE_HEADER:
                raise InputError(f"{path}: expected header {','.join(TRACE_HEADER)!r}, got {','.join(got or [])!r}")
            data = np.array([[float(x) for x in row] for row in reader], dtype=float).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2])


@dataclass
class FitResult:
    params: VehicleParams
    residual: float  # RMS speed error, m/s
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)

    @property
    def drag_area(self) -> float:
        return self.params.C_d * self.params.A_f

    def __iter__(self):
        yield self.params
        yield self.residual


def simulate_dataset(
    p_true: VehicleParams,
    u_trace,
    dt: float,
    noise_std: float = 0.0,
    v0: float = 0.0,
    seed: int = 0,
) -> Trace:
    """Flat-road Euler response to ``u_trace`` with Gaussian speed noise."""
    u = np.asarray(u_trace, dtype=float)
    if u.size == 0:
        raise ValueError("input trace is empty")
    if dt <= 0 or noise_std < 0:
        raise ValueError("need dt > 0 and noise_std >= 0")
    v = np.empty(u.size)
    x = VehicleState(0.0, v0)
    for k in range(u.size):
        v[k] = x.v
        x = step_euler(x, float(u[k]), 0.0, dt, p_true)
    if noise_std > 0:
        v = v + np.random.default_rng(seed).normal(0.0, noise_std, u.size)
    return Trace(np.arange(u.size) * dt, u, v)


def chirp_input(duration: float, dt: float, mean: float = 800.0, amplitude: float = 1500.0, f0: float = 0.005, f1: float = 0.1) -> np.ndarray:
    """Linear frequency sweep around ``mean`` N, for identification experiments."""
    t = np.arange(int(round(duration / dt))) * dt
    phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) / duration * t * t)
    return mean + amplitude * np.sin(phase)


def _simulate_batch(theta: np.ndarray, u: np.ndarray, v0: float, dt: float, rho: float, g: float) -> np.ndarray:
    """Speed traces for several (m, C_dA_f, C_r) rows at once."""
    m, cda, cr = theta[:, 0], theta[:, 1], theta[:, 2]
    out = np.empty((theta.shape[0], u.size))
    v = np.full(theta.shape[0], float(v0))
    k_drag = 0.5 * rho * cda
    roll = m * g * cr
    for k in range(u.size):
        out[:, k] = v
        force = u[k] - k_drag * v * v - np.where(v > 0, roll, 0.0)
        v = np.maximum(0.0, v + dt / m * force)
    return out


def simulate_speed(p: VehicleParams, u, v0: float, dt: float) -> np.ndarray:
    """Flat-road speed response from ``v0``, as used inside the fit."""
    theta = np.array([[p.m, p.C_d * p.A_f, p.C_r]])
    return _simulate_batch(theta, np.asarray(u, dtype=float), v0, dt, p.rho, p.g)[0]


def fit_parameters(
    traces,
    dt: float,
    p_init: VehicleParams,
    max_iter: int = 50,
    xtol: float = 1e-10,
    ftol: float = 1e-6,
    rank_tol: float = 1e-7,
) -> FitResult:
    """Levenberg-Marquardt on simulation error with finite-difference Jacobians.

    Free parameters are m, C_d*A_f and C_r; the fitted drag area is split back
    into C_d using ``p_init.A_f``. Raises ``IdentificationError`` when the
    Jacobian is rank deficient (e.g. constant input), and warns if the
    iteration limit is hit before convergence.
    """
    traces = [traces] if isinstance(traces, Trace) else list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    scale = np.array([p_init.m, p_init.C_d * p_init.A_f, p_init.C_r])
    n_res = sum(tr.v.size - 1 for tr in traces)

    def residuals(rows: np.ndarray) -> np.ndarray:
        theta = rows * scale
        parts = []
        for tr in traces:
            sim = _simulate_batch(theta, np.asarray(tr.u, float), float(tr.v[0]), dt, p_init.rho, p_init.g)
            parts.append(sim[:, 1:] - np.asarray(tr.v, float)[1:])
        return np.concatenate(parts, axis=1)

    def jacobian(x: np.ndarray) -> np.ndarray:
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        rows = np.vstack([x + np.diag(h), x - np.diag(h)])
        r = residuals(rows)
        return ((r[:3] - r[3:]) / (2 * h[:, None])).T

    x = np.ones(3)
    r = residuals(x[None, :])[0]
    cost = float(r @ r)
    history = [cost]
    lam = 1e-6
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = jacobian(x)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= rank_tol * sv[0]:
            raise IdentificationError(
                "Jacobian is rank deficient: the data cannot separate mass from the resistances; "
                "use richer excitation (varying input and speed)"
            )
        A = J.T @ J
        grad = J.T @ r
        step_taken = False
        while lam < 1e12:
            delta = np.linalg.solve(A + lam * np.diag(np.diag(A)), -grad)
            if np.linalg.norm(delta) <= xtol * (np.linalg.norm(x) + xtol):
                converged = True
                break
            x_new = x + delta
            if np.all(x_new > 0):
                r_new = residuals(x_new[None, :])[0]
                cost_new = float(r_new @ r_new)
                if cost_new < cost:
                    converged = cost - cost_new <= ftol * cost
                    x, r, cost = x_new, r_new, cost_new
                    history.append(cost)
                    lam = max(lam / 10.0, 1e-12)
                    step_taken = True
                    break
            lam *= 10.0
        if converged or not step_taken:
            converged = True
            break

    if not converged:
        warnings.warn(f"identification stopped after {max_iter} iterations without converging", RuntimeWarning)
    m, cda, cr = x * scale
    params = replace(p_init, m=float(m), C_d=float(cda / p_init.A_f), C_r=float(cr))
    return FitResult(params, float(np.sqrt(cost / n_res)), it, converged, history)
