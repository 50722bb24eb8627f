"""Compiled inner loops for the safe-set integrations.

Each kernel mirrors the pure-Python force law in ``dynamics``; they exist only
because the boundary is recomputed at every control step. On failure to stop
within ``max_steps`` a kernel returns an empty array instead of raising.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def interp1(x, xp, fp):
    n = xp.size
    if x <= xp[0]:
        return fp[0]
    if x >= xp[n - 1]:
        return fp[n - 1]
    i = np.searchsorted(xp, x, side="right")
    slope = (fp[i] - fp[i - 1]) / (xp[i] - xp[i - 1])
    return slope * (x - xp[i - 1]) + fp[i - 1]


@njit(cache=True)
def lead_stop(s, v, xp, fp, m, g, c_r, k_drag, brake, dt, max_steps):
    out = np.empty((max_steps + 1, 2))
    out[0, 0] = s
    out[0, 1] = v
    n = 1
    while v > 0.0:
        if n > max_steps:
            return np.empty((0, 2))
        th = interp1(s, xp, fp)
        force = -brake - k_drag * v * v - m * g * c_r * math.cos(th) - m * g * math.sin(th)
        s = s + v * dt
        v = max(0.0, v + dt / m * force)
        out[n, 0] = s
        out[n, 1] = v
        n += 1
    return out[:n].copy()


@njit(cache=True)
def ego_backward(s0, v_max, xp, fp, m, g, c_r, k_drag, brake, dt, max_steps):
    out = np.empty((max_steps + 1, 2))
    s = s0
    v = 0.0
    out[0, 0] = v
    out[0, 1] = s
    n = 1
    while v < v_max:
        if n > max_steps:
            return np.empty((0, 2))
        th = interp1(s, xp, fp)
        v_prev = v + dt / m * (brake + k_drag * v * v + m * g * c_r * math.cos(th) + m * g * math.sin(th))
        if v_prev <= v:
            return np.empty((0, 2))
        s = s - dt * v
        v = v_prev
        out[n, 0] = v
        out[n, 1] = s
        n += 1
    return out[:n].copy()


@njit(cache=True)
def min_gap_shoot(d, v0, lead_path, xp, fp, m, g, c_r, k_drag, brake, dt, max_steps):
    """Per starting gap, the smallest gap while both vehicles brake fully.

    Returns NaN for a point whose ego does not stop within ``max_steps``.
    """
    n_pts = d.size
    last = lead_path.size - 1
    out = np.empty(n_pts)
    for i in range(n_pts):
        s = lead_path[0] - d[i]
        v = v0[i]
        gap_min = d[i]
        j = 0
        while v > 0.0:
            if j > max_steps:
                gap_min = np.nan
                break
            th = interp1(s, xp, fp)
            force = -brake - k_drag * v * v - m * g * c_r * math.cos(th) - m * g * math.sin(th)
            s = s + v * dt
            v = max(0.0, v + dt / m * force)
            j += 1
            gap = lead_path[min(j, last)] - s
            if gap < gap_min:
                gap_min = gap
        out[i] = gap_min
    return out
