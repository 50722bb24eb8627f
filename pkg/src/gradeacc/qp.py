"""Dense strictly convex QP by the Goldfarb-Idnani dual active-set method.

Solves ``min 0.5 x'Hx + g'x  s.t.  C x >= d`` for small problems (tens of
variables). The dual method starts from the unconstrained minimum, so no
feasible initial point is needed, and it adds the most violated constraint
at each major iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class QPInfeasible(RuntimeError):
    pass


@dataclass
class QPResult:
    x: np.ndarray
    active: list[int]
    multipliers: np.ndarray
    iterations: int
    objective: float


def solve_qp(H, g, C=None, d=None, tol: float = 1e-9, max_iter: int = 500) -> QPResult:
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.size
    if C is None:
        C = np.zeros((0, n))
        d = np.zeros(0)
    C = np.asarray(C, dtype=float).reshape(-1, n)
    d = np.asarray(d, dtype=float).reshape(-1)

    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError("QP Hessian must be positive definite") from exc
    L_inv = np.linalg.solve(L, np.eye(n))
    H_inv = L_inv.T @ L_inv

    row_scale = np.maximum(np.linalg.norm(C, axis=1), 1e-300)
    x, active, u, iterations, code = _dual_active_set(H_inv, -H_inv @ g, C, d, row_scale, tol, max_iter)
    if code == _INFEASIBLE:
        raise QPInfeasible(f"constraint {iterations} cannot be satisfied")
    if code == _MAX_ITER:
        raise RuntimeError(f"QP did not converge in {max_iter} iterations")
    return QPResult(
        x=x, active=active.tolist(), multipliers=u, iterations=iterations, objective=float(0.5 * x @ H @ x + g @ x)
    )


_OK, _INFEASIBLE, _MAX_ITER = 0, 1, 2


@njit(cache=True)
def _dual_active_set(H_inv, x0, C, d, row_scale, tol, max_iter):
    n = x0.size
    m = C.shape[0]
    x = x0.copy()
    active = np.empty(m, dtype=np.int64)
    u = np.empty(m)
    is_active = np.zeros(m, dtype=np.bool_)
    na = 0
    iterations = 0
    while True:
        # most violated inactive constraint, by normalised slack
        p = -1
        worst = -tol
        for i in range(m):
            if not is_active[i]:
                sl = (C[i] @ x - d[i]) / row_scale[i]
                if sl < worst:
                    worst = sl
                    p = i
        if p < 0:
            break
        n_p = np.ascontiguousarray(C[p])
        u_p = 0.0
        while True:
            iterations += 1
            if iterations > max_iter:
                return x, active[:na].copy(), u[:na].copy(), iterations, _MAX_ITER
            if na > 0:
                Nm = np.ascontiguousarray(C[active[:na]].T)
                HN = H_inv @ Nm
                M = Nm.T @ HN
                r = np.linalg.solve(M, HN.T @ n_p)
                z = H_inv @ n_p - HN @ r
            else:
                r = np.empty(0)
                z = H_inv @ n_p

            # partial step: largest step keeping active multipliers nonnegative
            t1 = np.inf
            k_drop = -1
            for i in range(na):
                if r[i] > 1e-14 and u[i] / r[i] < t1:
                    t1 = u[i] / r[i]
                    k_drop = i

            zn = z @ n_p
            if np.sqrt(z @ z) <= 1e-12 * max(1.0, np.sqrt(n_p @ n_p)) or zn <= 0.0:
                t2 = np.inf
            else:
                t2 = (d[p] - n_p @ x) / zn

            t = min(t1, t2)
            if not np.isfinite(t):
                return x, active[:na].copy(), u[:na].copy(), p, _INFEASIBLE
            for i in range(na):
                u[i] -= t * r[i]
            u_p += t
            if np.isfinite(t2):
                x = x + t * z
                if t == t2:
                    active[na] = p
                    u[na] = u_p
                    is_active[p] = True
                    na += 1
                    break
            is_active[active[k_drop]] = False
            for i in range(k_drop, na - 1):
                active[i] = active[i + 1]
                u[i] = u[i + 1]
            na -= 1
    return x, active[:na].copy(), u[:na].copy(), iterations, _OK
