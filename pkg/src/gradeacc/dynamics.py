"""Point-mass longitudinal vehicle model.

State is ``(s, v)``: position along the road and speed. The input ``u`` is a
single signed net force in Newtons (positive drives, negative brakes). Road
grade ``theta`` is in radians, positive uphill.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VehicleParams:
    m: float = 2278.0
    A_f: float = 2.63
    rho: float = 1.206
    C_d: float = 0.2791
    C_r: float = 0.0089
    g: float = 9.81
    F_brake_max: float = 3000.0
    F_traction_max: float = 3000.0

    def __post_init__(self):
        for name in ("m", "A_f", "rho", "g", "F_brake_max", "F_traction_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"VehicleParams.{name} must be > 0, got {getattr(self, name)}")
        for name in ("C_d", "C_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"VehicleParams.{name} must be >= 0, got {getattr(self, name)}")

    @property
    def drag_factor(self) -> float:
        """Lumped ``rho * C_d * A_f`` so that drag is ``0.5 * drag_factor * v**2``."""
        return self.rho * self.C_d * self.A_f


@dataclass(frozen=True)
class VehicleState:
    s: float
    v: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"velocity must be >= 0, got {self.v}")


def aero_drag(v: float, p: VehicleParams) -> float:
    if v < 0:
        raise ValueError(f"aero_drag: negative velocity {v}")
    return 0.5 * p.rho * p.C_d * p.A_f * v * v


def rolling_resistance(theta: float, v: float, p: VehicleParams) -> float:
    """Rolling resistance; zero at standstill so a parked car does not roll backwards."""
    _check_grade(theta)
    if v <= 0:
        return 0.0
    return p.m * p.g * p.C_r * math.cos(theta)


def gravity_force(theta: float, p: VehicleParams) -> float:
    _check_grade(theta)
    return p.m * p.g * math.sin(theta)


def _check_grade(theta: float) -> None:
    if not abs(theta) < math.pi / 2:
        raise ValueError(f"grade angle must satisfy |theta| < pi/2, got {theta}")


def resistive_force(v: float, theta: float, p: VehicleParams) -> float:
    """Sum of drag, rolling resistance and grade force opposing motion."""
    return aero_drag(v, p) + rolling_resistance(theta, v, p) + gravity_force(theta, p)


def step_euler(x: VehicleState, u: float, theta: float, dt: float, p: VehicleParams) -> VehicleState:
    """One explicit Euler step; velocity is clamped at zero (no reversing)."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    v_next = x.v + dt / p.m * (u - resistive_force(x.v, theta, p))
    return VehicleState(x.s + x.v * dt, max(0.0, v_next))


def step_arrays(s, v, u, theta, dt: float, p: VehicleParams):
    """Vectorised ``step_euler`` over numpy arrays, used by the safe-set shooting."""
    rolling = np.where(v > 0, p.m * p.g * p.C_r * np.cos(theta), 0.0)
    force = u - 0.5 * p.drag_factor * v * v - rolling - p.m * p.g * np.sin(theta)
    return s + v * dt, np.maximum(0.0, v + dt / p.m * force)


def linearize(x: VehicleState, u: float, theta: float, dt: float, p: VehicleParams):
    """Jacobians of ``step_euler`` at ``(x, u)``.

    Returns ``(A, B, c)`` such that ``A @ [s, v] + B * u + c`` equals the
    unclamped Euler step exactly at the expansion point.
    """
    A = np.array([[1.0, dt], [0.0, 1.0 - dt / p.m * p.drag_factor * x.v]])
    B = np.array([0.0, dt / p.m])
    f = np.array([x.s + x.v * dt, x.v + dt / p.m * (u - resistive_force(x.v, theta, p))])
    c = f - A @ np.array([x.s, x.v]) - B * u
    return A, B, c


def steady_state_force(v: float, theta: float, p: VehicleParams) -> float:
    """Input that holds speed ``v`` constant on grade ``theta``."""
    return resistive_force(v, theta, p)
