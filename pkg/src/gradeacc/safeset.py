"""Robust control-invariant safe distance from grade and lead-vehicle preview.

The boundary is built in two integrations: the lead brakes at full force
until it stops (forward Euler along its own road grade), then the ego's
full-braking motion is integrated backwards in time from a standstill
``l_min`` behind the lead's stop point up to ``v_max``. Each backward step
gives one point ``(v_e, d_min)``; a degree-2 polynomial through the points is
the safe distance as a function of ego speed.

The raw two-step points only compare the vehicles once both have stopped. A
forward shooting pass then refines every point so the gap stays above
``l_min`` at every integration step, which matters when the lead stops after
the ego or the two see different grades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .dynamics import VehicleParams, VehicleState
from .grade import GradeProfile

DEFAULT_DT_INT = 0.05
DEFAULT_MAX_STEPS = 10_000


class SafeSetError(RuntimeError):
    """Full braking cannot bring a vehicle to rest on the given road."""


@dataclass(frozen=True)
class CombinedState:
    gap: float
    v_e: float
    v_l: float

    def admissible(self, l_min: float) -> bool:
        return self.gap > l_min and self.v_e >= 0 and self.v_l >= 0


@dataclass(frozen=True, eq=False)
class SafeSetBoundary:
    coeffs: tuple[float, float, float]
    v_range: tuple[float, float]
    lead_snapshot: tuple[float, float]
    l_min: float
    fit_residual: float
    degenerate: bool = False
    # data behind the fit
    v_points: np.ndarray = field(default=None, repr=False)
    d_min_points: np.ndarray = field(default=None, repr=False)
    d_req_points: np.ndarray = field(default=None, repr=False)
    s_stop: float = math.nan
    t_stop: float = math.nan
    # inputs, so the boundary can be recomputed for another lead speed
    profile: GradeProfile | None = field(default=None, repr=False)
    ego_profile: GradeProfile | None = field(default=None, repr=False)
    p_lead: VehicleParams | None = field(default=None, repr=False)
    p_ego: VehicleParams | None = field(default=None, repr=False)
    dt_int: float = DEFAULT_DT_INT

    def __call__(self, v_e):
        return d_safe(self, v_e)

    def slope(self, v_e: float) -> float:
        """Derivative of ``d_safe`` in ``v_e`` (zero on the ``l_min`` floor)."""
        c0, c1, c2 = self.coeffs
        if c0 + c1 * v_e + c2 * v_e * v_e <= self.l_min:
            return 0.0
        return c1 + 2.0 * c2 * v_e


def _force_args(p: VehicleParams):
    return p.m, p.g, p.C_r, 0.5 * p.drag_factor, p.F_brake_max


def _lead_stop_arrays(lead: VehicleState, profile: GradeProfile, p: VehicleParams, dt: float, max_steps: int):
    if dt <= 0:
        raise ValueError("dt_int must be > 0")
    out = _kernels.lead_stop(
        float(lead.s), float(lead.v), profile.positions, profile.grades, *_force_args(p), dt, max_steps
    )
    if out.shape[0] == 0:
        raise SafeSetError(
            f"lead vehicle did not stop within {max_steps} steps of full braking; "
            "road too steep for its braking force"
        )
    return out[:, 0], out[:, 1]


def lead_stop_trajectory(
    lead: VehicleState,
    profile: GradeProfile,
    p_lead: VehicleParams,
    dt_int: float = DEFAULT_DT_INT,
    max_steps: int = DEFAULT_MAX_STEPS,
):
    """Forward Euler of the lead under full braking until it reaches zero speed.

    Returns ``(trajectory, s_stop, t_stop)``.
    """
    ss, vs = _lead_stop_arrays(lead, profile, p_lead, dt_int, max_steps)
    traj = [VehicleState(float(s), float(v)) for s, v in zip(ss, vs)]
    return traj, float(ss[-1]), (len(ss) - 1) * dt_int


def _ego_backward_arrays(s_stop, profile, p, v_max, dt, l_min, max_steps):
    if dt <= 0 or v_max <= 0 or l_min < 0:
        raise ValueError("ego_backward_trajectory needs dt_int > 0, v_max > 0, l_min >= 0")
    out = _kernels.ego_backward(
        float(s_stop - l_min), float(v_max), profile.positions, profile.grades, *_force_args(p), dt, max_steps
    )
    if out.shape[0] == 0:
        raise SafeSetError(
            f"backward ego integration did not reach v_max within {max_steps} steps; "
            "braking cannot decelerate the ego on this road"
        )
    return out[:, 0], out[:, 1]


def ego_backward_trajectory(
    s_stop: float,
    profile: GradeProfile,
    p_ego: VehicleParams,
    v_max: float,
    dt_int: float = DEFAULT_DT_INT,
    l_min: float = 5.0,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> list[tuple[float, float]]:
    """Ego full-braking motion integrated backwards in time from rest.

    Starts at ``(0, s_stop - l_min)`` and ends at the first point with
    ``v_e >= v_max``. Returns ``(v_e, s_e)`` pairs, velocities increasing.
    """
    vs, ss = _ego_backward_arrays(s_stop, profile, p_ego, v_max, dt_int, l_min, max_steps)
    return list(zip(vs.tolist(), ss.tolist()))


def _min_gap_shooting(d, v0, lead_path, ego_profile, p_ego, dt, max_steps):
    """Smallest gap over time when both vehicles brake fully, per starting gap ``d``."""
    gaps = _kernels.min_gap_shoot(
        d, v0, lead_path, ego_profile.positions, ego_profile.grades, *_force_args(p_ego), dt, max_steps
    )
    if np.isnan(gaps).any():
        raise SafeSetError("ego did not stop under full braking during safe-set shooting")
    return gaps


def _required_gaps(d_guess, v_e, lead_path, ego_profile, p_ego, dt, l_min, max_steps, tol=1e-6, iters=30):
    """Solve, per point, for the starting gap whose minimum over full braking equals ``l_min``.

    Secant iteration on ``l_min - min_gap(d)``; only unconverged points are re-shot.
    Any remaining shortfall is added on, so no point ends below ``l_min``.
    """
    def deficit(d, idx):
        return l_min - _min_gap_shooting(d, v_e[idx], lead_path, ego_profile, p_ego, dt, max_steps)

    idx = np.arange(v_e.size)
    d_prev = np.maximum(d_guess, l_min)
    g_prev = deficit(d_prev, idx)
    d = d_prev + g_prev
    out = d.copy()
    g_out = np.zeros_like(out)
    for _ in range(iters):
        g = deficit(d, idx)
        out[idx] = d
        g_out[idx] = g
        open_ = np.abs(g) > tol
        if not open_.any():
            break
        denom = g - g_prev
        safe = np.abs(denom) > 1e-12
        step = np.where(safe, g * (d - d_prev) / np.where(safe, denom, 1.0), -g)
        idx, d_prev, g_prev, d = idx[open_], d[open_], g[open_], (d - step)[open_]
    return out + np.maximum(g_out, 0.0)


def fit_boundary_poly(v, d, l_min):
    """Tightest degree-2 curve ``c0 + c1 v + c2 v^2`` lying on or above the data.

    Minimises the summed overshoot over the points above the floor (plus the
    last floor point before them), subject to the curve dominating every one of
    them and ``c1, c2 >= 0``. Points on the floor elsewhere are covered by the
    ``l_min`` floor in ``d_safe``. With no point above the floor, or fewer than
    three points in total, the boundary is the constant ``max(d, l_min)``,
    flagged degenerate.
    Returns ``(coeffs, fit_residual, degenerate)``.
    """
    rising = d > l_min + 1e-9
    if v.size < 3 or not rising.any():
        return (float(max(np.max(d), l_min)), 0.0, 0.0), 0.0, True
    # anchor the curve where the data leaves the floor
    floor = np.flatnonzero(~rising & (v < v[rising].min()))
    if floor.size:
        rising[floor[-1]] = True
    scale = max(float(np.max(v)), 1.0)
    x = v[rising] / scale
    dr = d[rising]
    A = np.column_stack([np.ones_like(x), x, x * x])
    sol = linprog(
        A.sum(axis=0), A_ub=-A, b_ub=-dr, bounds=[(None, None), (0, None), (0, None)], method="highs"
    )
    if sol.status != 0:
        raise SafeSetError(f"boundary fit failed: {sol.message}")
    c = sol.x
    # absorb the solver's feasibility tolerance
    c0 = c[0] + max(0.0, float(np.max(dr - A @ c)))
    c1, c2 = c[1] / scale, c[2] / scale**2
    fitted = np.maximum(l_min, c0 + c1 * v + c2 * v * v)
    return (float(c0), float(c1), float(c2)), float(np.max(np.abs(fitted - d))), False


def compute_boundary(
    lead: VehicleState,
    profile: GradeProfile,
    p_lead: VehicleParams,
    p_ego: VehicleParams,
    v_max: float,
    dt_int: float = DEFAULT_DT_INT,
    l_min: float = 5.0,
    ego_profile: GradeProfile | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> SafeSetBoundary:
    """Safe distance boundary for the given lead state.

    ``ego_profile`` lets the ego see a different road than the lead (used by
    the bound-substituted baseline); by default both share ``profile``.
    """
    ego_profile = profile if ego_profile is None else ego_profile
    lead_s, lead_v = _lead_stop_arrays(lead, profile, p_lead, dt_int, max_steps)
    s_stop = float(lead_s[-1])
    v_e, s_e = _ego_backward_arrays(s_stop, ego_profile, p_ego, v_max, dt_int, l_min, max_steps)
    d_min = lead_s[0] - s_e
    d_req = _required_gaps(d_min, v_e, lead_s, ego_profile, p_ego, dt_int, l_min, max_steps)
    coeffs, resid, degenerate = fit_boundary_poly(v_e, d_req, l_min)
    _check_monotone(coeffs, l_min, v_max)
    return SafeSetBoundary(
        coeffs=coeffs,
        v_range=(0.0, float(v_max)),
        lead_snapshot=(float(lead.s), float(lead.v)),
        l_min=float(l_min),
        fit_residual=resid,
        degenerate=degenerate,
        v_points=v_e,
        d_min_points=d_min,
        d_req_points=d_req,
        s_stop=s_stop,
        t_stop=(lead_s.size - 1) * dt_int,
        profile=profile,
        ego_profile=ego_profile,
        p_lead=p_lead,
        p_ego=p_ego,
        dt_int=dt_int,
    )


def _check_monotone(coeffs, l_min, v_max):
    v = np.linspace(0.0, 2.0 * v_max, 201)
    d = np.maximum(l_min, coeffs[0] + coeffs[1] * v + coeffs[2] * v * v)
    if np.any(np.diff(d) < -1e-12):
        raise SafeSetError(f"fitted safe distance is decreasing in ego speed: coeffs={coeffs}")


def d_safe(boundary: SafeSetBoundary, v_e):
    """Required gap at ego speed ``v_e``: the fitted polynomial, floored at ``l_min``."""
    if np.any(np.asarray(v_e) < 0):
        raise ValueError("d_safe: ego speed must be >= 0")
    c0, c1, c2 = boundary.coeffs
    out = np.maximum(boundary.l_min, c0 + c1 * np.asarray(v_e, dtype=float) + c2 * np.square(v_e))
    return float(out) if np.ndim(out) == 0 else out


def safe_time_gap(boundary: SafeSetBoundary, v: float) -> float:
    """Safe distance divided by speed when ego and lead travel at the same speed ``v``."""
    if v <= 0:
        raise ValueError("safe_time_gap is undefined at v = 0")
    if boundary.profile is None:
        raise ValueError("boundary carries no provenance to recompute from")
    same_speed = compute_boundary(
        VehicleState(boundary.lead_snapshot[0], v),
        boundary.profile,
        boundary.p_lead,
        boundary.p_ego,
        boundary.v_range[1],
        boundary.dt_int,
        boundary.l_min,
        ego_profile=boundary.ego_profile,
    )
    return d_safe(same_speed, v) / v


def conservative_boundary(
    theta_min: float,
    theta_max: float,
    v_l: float,
    p_lead: VehicleParams,
    p_ego: VehicleParams,
    v_max: float,
    dt_int: float = DEFAULT_DT_INT,
    l_min: float = 5.0,
) -> SafeSetBoundary:
    """Worst case over grade bounds: lead on ``theta_max`` (stops soonest), ego on ``theta_min``."""
    if theta_min > theta_max:
        raise ValueError("theta_min must not exceed theta_max")
    return compute_boundary(
        VehicleState(0.0, v_l),
        GradeProfile.constant(theta_max),
        p_lead,
        p_ego,
        v_max,
        dt_int,
        l_min,
        ego_profile=GradeProfile.constant(theta_min),
    )


def closed_form_distance(v_e, v_l, a_e: float, a_l: float, l_min: float):
    """``l_min + v_e^2 / (2 a_e) - v_l^2 / (2 a_l)`` for constant decelerations."""
    return l_min + np.square(v_e) / (2 * a_e) - v_l * v_l / (2 * a_l)


class BoundaryCache:
    """Memoises boundaries by lead state; profiles and params are fixed per cache."""

    def __init__(self, profile, p_lead, p_ego, v_max, dt_int, l_min, ego_profile=None, maxsize=64):
        self.args = (p_lead, p_ego, v_max, dt_int, l_min)
        self.profile = profile
        self.ego_profile = ego_profile
        self.maxsize = maxsize
        self._store: dict[tuple[float, float], SafeSetBoundary] = {}
        self.hits = 0
        self.misses = 0

    def get(self, s_lead: float, v_lead: float) -> SafeSetBoundary:
        key = (round(float(s_lead), 9), round(float(v_lead), 9))
        b = self._store.get(key)
        if b is not None:
            self.hits += 1
            return b
        self.misses += 1
        p_lead, p_ego, v_max, dt_int, l_min = self.args
        b = compute_boundary(
            VehicleState(key[0], key[1]), self.profile, p_lead, p_ego, v_max, dt_int, l_min,
            ego_profile=self.ego_profile,
        )
        if len(self._store) >= self.maxsize:
            self._store.pop(next(iter(self._store)))
        self._store[key] = b
        return b
