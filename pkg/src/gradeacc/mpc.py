"""Receding-horizon controller with grade preview and the safe-distance constraint.

Each call solves a finite-horizon problem by successive linearisation: the
nominal input sequence is simulated through the nonlinear Euler model, the
dynamics and the safe-distance curve are linearised along that trajectory,
the resulting convex QP (condensed onto the inputs) is solved, and the new
inputs are re-simulated. There is no mode flag: with no lead the safety rows
are simply absent, and with a lead they become active only when the gap is
tight, which is what produces smooth CC/ACC switching.

Inside the cost, inputs are expressed in kN so the default weights
(Q=10, R_u=1, R_du=10, P=100) act on comparable magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dynamics import VehicleParams, VehicleState, steady_state_force
from .grade import GradeProfile, preview_over_horizon
from .qp import solve_qp
from .safeset import BoundaryCache, SafeSetBoundary

KN = 1000.0
SLACK_PENALTY = 1.0e6  # per metre (or m/s) of constraint relaxation
SLACK_QUAD = 1.0
SLACK_TOL = 1e-6
STAGE_MARGIN = 0.05  # m of tightening on predicted safety rows, k >= 1

OPTIMAL = "optimal"
MAX_ITERS = "max-iters"
FALLBACK = "infeasible-fallback"


@dataclass(frozen=True)
class MPCConfig:
    N: int = 25
    dt: float = 0.2
    Q: float = 10.0
    R_u: float = 1.0
    R_du: float = 10.0
    P: float = 100.0
    v_min: float = 0.0
    v_max: float = 30.0
    u_min: float = -3000.0
    u_max: float = 3000.0
    v_ref: float = 20.0
    sqp_max_iters: int = 10
    sqp_tol: float = 0.5

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("MPCConfig.N must be >= 2")
        if self.dt <= 0:
            raise ValueError("MPCConfig.dt must be > 0")
        if min(self.Q, self.R_u, self.R_du, self.P) < 0:
            raise ValueError("MPC weights must be >= 0")
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")
        if not self.u_min < self.u_max:
            raise ValueError("need u_min < u_max")
        if self.sqp_max_iters < 1 or self.sqp_tol <= 0:
            raise ValueError("need sqp_max_iters >= 1 and sqp_tol > 0")


@dataclass(frozen=True)
class LeadPrediction:
    """Lead positions and speeds at the controller's sample times, k = 0..N."""

    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if s.shape != v.shape or s.ndim != 1:
            raise ValueError("lead prediction arrays must be 1-D and equal length")
        if np.any(np.diff(s) < -1e-9):
            raise ValueError("lead positions must be nondecreasing")
        if np.any(v < 0):
            raise ValueError("lead speeds must be >= 0")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)

    def __len__(self):
        return self.s.size

    @classmethod
    def constant_velocity(cls, lead: VehicleState, N: int, dt: float) -> "LeadPrediction":
        """Sensor-only predictor: the lead keeps its current speed."""
        k = np.arange(N + 1)
        return cls(lead.s + lead.v * dt * k, np.full(N + 1, float(lead.v)))


@dataclass
class MPCProblem:
    x0: VehicleState
    theta: np.ndarray
    cfg: MPCConfig
    params: VehicleParams
    lead: LeadPrediction | None = None
    boundaries: list[SafeSetBoundary] | None = None
    u_prev: float = 0.0

    def __post_init__(self):
        n = self.cfg.N + 1
        if len(self.theta) != n:
            raise ValueError(f"grade preview has {len(self.theta)} entries, expected {n}")
        if (self.lead is None) != (self.boundaries is None):
            raise ValueError("lead prediction and safe-set boundary must be given together")
        if self.lead is not None and (len(self.lead) != n or len(self.boundaries) != n):
            raise ValueError(f"lead prediction and boundaries must have {n} entries")

    @property
    def n_safety_rows(self) -> int:
        return 0 if self.lead is None else self.cfg.N + 1


@dataclass
class MPCSolution:
    u_seq: np.ndarray
    states: list[VehicleState]
    status: str
    iterations: int
    objective: float
    slack: float = 0.0
    history: list[float] = field(default_factory=list)

    @property
    def velocities(self) -> np.ndarray:
        return np.array([x.v for x in self.states])

    @property
    def positions(self) -> np.ndarray:
        return np.array([x.s for x in self.states])


def _resolve_boundaries(boundary, lead: LeadPrediction, n: int) -> list[SafeSetBoundary]:
    if isinstance(boundary, SafeSetBoundary):
        return [boundary] * n
    if isinstance(boundary, BoundaryCache):
        # one boundary per predicted lead state; consecutive steps share all but the newest
        return [boundary.get(s, v) for s, v in zip(lead.s, lead.v)]
    boundaries = list(boundary)
    if len(boundaries) != n:
        raise ValueError(f"expected {n} boundaries, got {len(boundaries)}")
    return boundaries


def build_problem(
    x: VehicleState,
    profile: GradeProfile,
    lead: LeadPrediction | None,
    boundary,
    cfg: MPCConfig,
    params: VehicleParams | None = None,
    u_prev: float = 0.0,
) -> MPCProblem:
    """Assemble one horizon problem.

    ``boundary`` may be one ``SafeSetBoundary`` used on every row, a sequence
    of N+1 boundaries, or a ``BoundaryCache`` keyed by lead state.
    """
    params = params or VehicleParams()
    theta = preview_over_horizon(profile, x.s, x.v, cfg.N, cfg.dt)
    boundaries = None
    if lead is not None:
        if boundary is None:
            raise ValueError("a lead prediction needs a safe-set boundary")
        boundaries = _resolve_boundaries(boundary, lead, cfg.N + 1)
    elif boundary is not None:
        raise ValueError("a safe-set boundary was given without a lead prediction")
    return MPCProblem(x, theta, cfg, params, lead, boundaries, u_prev)


def _rollout(prob: MPCProblem, u_seq):
    """Positions and speeds under ``u_seq`` (N); same arithmetic as ``step_euler``."""
    cfg, p = prob.cfg, prob.params
    dt, m = cfg.dt, p.m
    k_drag = 0.5 * p.rho * p.C_d * p.A_f
    roll, grav = prob._grade_forces
    n = cfg.N
    s = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    s[0], v[0] = prob.x0.s, prob.x0.v
    clamped = [False] * n
    for k in range(n):
        vk = v[k]
        res = k_drag * vk * vk + (roll[k] if vk > 0 else 0.0) + grav[k]
        nxt = vk + dt / m * (float(u_seq[k]) - res)
        s[k + 1] = s[k] + vk * dt
        if nxt < 0.0:
            nxt = 0.0
            clamped[k] = True
        v[k + 1] = nxt
    return np.array(s), np.array(v), clamped


def simulate(prob: MPCProblem, u_seq) -> list[VehicleState]:
    """Nonlinear prediction of the ego states k = 0..N under ``u_seq``."""
    s, v, _ = _rollout(prob, u_seq)
    return [VehicleState(a, b) for a, b in zip(s.tolist(), v.tolist())]


def _cost(prob: MPCProblem, u_seq, v) -> float:
    cfg = prob.cfg
    u = np.asarray(u_seq) / KN
    du = np.diff(np.concatenate([[prob.u_prev / KN], u]))
    return float(
        cfg.Q * np.sum((v[: cfg.N] - cfg.v_ref) ** 2)
        + cfg.R_u * np.sum(u * u)
        + cfg.R_du * np.sum(du * du)
        + cfg.P * (v[cfg.N] - cfg.v_ref) ** 2
    )


def objective(prob: MPCProblem, u_seq, states) -> float:
    return _cost(prob, u_seq, np.array([x.v for x in states]))


def _boundary_eval(prob: MPCProblem, v):
    """Safe distance and its slope on every row, vectorised over the horizon."""
    c, l_min = prob._coeffs, prob._l_min
    poly = c[:, 0] + c[:, 1] * v + c[:, 2] * v * v
    on_curve = poly > l_min
    return np.where(on_curve, poly, l_min), np.where(on_curve, c[:, 1] + 2.0 * c[:, 2] * v, 0.0)


def _row_violation(prob: MPCProblem, s, v, margin: float) -> np.ndarray:
    d, _ = _boundary_eval(prob, v)
    out = d - (prob.lead.s - s)
    out[1:] += margin
    return out


def safety_violation(prob: MPCProblem, states, margin: float = 0.0) -> np.ndarray:
    """Per-row amount by which ``gap >= d_safe(v)`` fails (positive = violated)."""
    if prob.lead is None:
        return np.zeros(0)
    s = np.array([x.s for x in states])
    v = np.array([x.v for x in states])
    return _row_violation(prob, s, v, margin)


def _merit(prob, u_seq, s, v) -> float:
    cfg = prob.cfg
    viol = max(0.0, float(np.max(cfg.v_min - v[1:])), float(np.max(v[1:] - cfg.v_max)))
    if prob.lead is not None:
        viol += max(0.0, float(np.max(_row_violation(prob, s, v, STAGE_MARGIN))))
    return _cost(prob, u_seq, v) + SLACK_PENALTY * viol


def _sensitivities(prob: MPCProblem, v, clamped):
    """d s_k / d u and d v_k / d u (u in kN) of the Euler model along a rollout."""
    cfg, p = prob.cfg, prob.params
    N, dt = cfg.N, cfg.dt
    b = dt / p.m * KN
    a_vv = 1.0 - dt / p.m * p.drag_factor * v
    S_s = np.zeros((N + 1, N))
    S_v = np.zeros((N + 1, N))
    for k in range(N):
        S_s[k + 1] = S_s[k] + dt * S_v[k]
        if clamped[k]:
            continue  # standstill clamp: speed is pinned at zero, insensitive to u
        S_v[k + 1] = a_vv[k] * S_v[k]
        S_v[k + 1, k] += b
    return S_s, S_v


def _build_qp(prob: MPCProblem, u_bar, s_bar, v_bar, clamped):
    cfg = prob.cfg
    N = cfg.N
    has_lead = prob.lead is not None
    n_z = N + 1 + (1 if has_lead else 0)
    iv = N  # velocity-bound slack
    isf = N + 1  # safety slack
    S_s, S_v = _sensitivities(prob, v_bar, clamped)
    ub = np.asarray(u_bar) / KN
    v_off = v_bar - S_v @ ub  # v_k ~ S_v[k] @ u + v_off[k]
    s_off = s_bar - S_s @ ub

    H = np.zeros((n_z, n_z))
    g = np.zeros(n_z)
    w = np.full(N + 1, cfg.Q)
    w[0] = 0.0
    w[N] = cfg.P
    H[:N, :N] = 2.0 * (S_v.T * w) @ S_v + prob._H_input
    g[:N] = 2.0 * S_v.T @ (w * (v_off - cfg.v_ref))
    g[0] += -2.0 * cfg.R_du * prob.u_prev / KN
    H[iv, iv] = 2.0 * SLACK_QUAD
    g[iv] = SLACK_PENALTY

    blocks = [prob._C_input]
    rhs = [prob._d_input]
    Cv = np.zeros((2 * N, n_z))
    Cv[:N, :N] = S_v[1:]
    Cv[N:, :N] = -S_v[1:]
    Cv[:, iv] = 1.0
    blocks.append(Cv)
    rhs.append(np.concatenate([cfg.v_min - v_off[1:], v_off[1:] - cfg.v_max]))
    if has_lead:
        H[isf, isf] = 2.0 * SLACK_QUAD
        g[isf] = SLACK_PENALTY
        d_bar, slope = _boundary_eval(prob, v_bar)
        coef = S_s + slope[:, None] * S_v
        margin = np.full(N + 1, STAGE_MARGIN)
        margin[0] = 0.0
        # s_lead - s - (d(v_bar) + slope (v - v_bar)) + slack >= margin
        const = prob.lead.s - s_off - d_bar - slope * (v_off - v_bar)
        Cs = np.zeros((N + 2, n_z))
        Cs[0, isf] = 1.0
        Cs[1:, :N] = -coef
        Cs[1:, isf] = 1.0
        blocks.append(Cs)
        rhs.append(np.concatenate([[0.0], margin - const]))
    return H, g, np.vstack(blocks), np.concatenate(rhs)


def _prepare(prob: MPCProblem) -> None:
    """Per-problem constants reused by every SQP iteration."""
    cfg, p = prob.cfg, prob.params
    N = cfg.N
    th = np.asarray(prob.theta[:N], dtype=float)
    prob._grade_forces = ((p.m * p.g * p.C_r * np.cos(th)).tolist(), (p.m * p.g * np.sin(th)).tolist())
    D = np.eye(N) - np.eye(N, k=-1)
    prob._H_input = 2.0 * cfg.R_u * np.eye(N) + 2.0 * cfg.R_du * D.T @ D + 1e-9 * np.eye(N)
    n_z = N + 1 + (1 if prob.lead is not None else 0)
    C = np.zeros((2 * N + 1, n_z))
    C[:N, :N] = np.eye(N)
    C[N : 2 * N, :N] = -np.eye(N)
    C[2 * N, N] = 1.0
    prob._C_input = C
    prob._d_input = np.concatenate([np.full(N, cfg.u_min / KN), np.full(N, -cfg.u_max / KN), [0.0]])
    if prob.lead is not None:
        prob._coeffs = np.array([b.coeffs for b in prob.boundaries], dtype=float)
        prob._l_min = np.array([b.l_min for b in prob.boundaries], dtype=float)


def _initial_guess(prob: MPCProblem, warm_start):
    cfg = prob.cfg
    if warm_start is not None and len(warm_start) == cfg.N:
        u = np.asarray(warm_start, dtype=float)
    else:
        u = np.full(cfg.N, steady_state_force(prob.x0.v, float(prob.theta[0]), prob.params))
    return np.clip(u, cfg.u_min, cfg.u_max)


def solve(prob: MPCProblem, warm_start: Sequence[float] | None = None) -> MPCSolution:
    cfg = prob.cfg
    _prepare(prob)
    u_bar = _initial_guess(prob, warm_start)
    s, v, clamped = _rollout(prob, u_bar)
    merit = _merit(prob, u_bar, s, v)
    history = [merit]
    converged = False
    it = 0
    for it in range(1, cfg.sqp_max_iters + 1):
        H, g, C, d = _build_qp(prob, u_bar, s, v, clamped)
        res = solve_qp(H, g, C, d)
        step = np.clip(res.x[: cfg.N] * KN, cfg.u_min, cfg.u_max) - u_bar
        alpha = 1.0
        accepted = False
        while alpha >= 1.0 / 32:
            u_try = u_bar + alpha * step
            trial = _rollout(prob, u_try)
            m_try = _merit(prob, u_try, trial[0], trial[1])
            if m_try <= merit + 1e-9 * max(1.0, abs(merit)):
                accepted = True
                break
            alpha *= 0.5
        change = 0.0
        if accepted:
            change = float(np.max(np.abs(u_try - u_bar)))
            u_bar, merit = u_try, m_try
            s, v, clamped = trial
            history.append(merit)
        if change < cfg.sqp_tol:
            converged = True
            break

    status = OPTIMAL if converged else MAX_ITERS
    v_slack = float(res.x[cfg.N])
    if prob.lead is not None:
        # measured on the re-simulated trajectory: row 0 is the current state and must
        # hold exactly; predicted rows may use up their tightening margin
        viol = _row_violation(prob, s, v, 0.0)
        viol[1:] -= STAGE_MARGIN
        slack = max(v_slack, float(np.max(viol)), 0.0)
    else:
        slack = v_slack
    if slack > SLACK_TOL:
        status = FALLBACK
    return MPCSolution(
        u_seq=u_bar,
        states=[VehicleState(a, b) for a, b in zip(s.tolist(), v.tolist())],
        status=status,
        iterations=it,
        objective=_cost(prob, u_bar, v),
        slack=slack,
        history=history,
    )


class Controller:
    """Stateful wrapper: remembers the applied input and the warm start."""

    def __init__(self, cfg: MPCConfig | None = None, params: VehicleParams | None = None):
        self.cfg = cfg or MPCConfig()
        self.params = params or VehicleParams()
        self.u_prev = 0.0
        self.warm: np.ndarray | None = None

    def reset(self):
        self.u_prev = 0.0
        self.warm = None

    def step(self, x: VehicleState, profile: GradeProfile, lead=None, boundary=None):
        prob = build_problem(x, profile, lead, boundary, self.cfg, self.params, self.u_prev)
        sol = solve(prob, self.warm)
        if sol.status == FALLBACK:
            u = self.cfg.u_min
        else:
            u = float(sol.u_seq[0])
        self.warm = np.concatenate([sol.u_seq[1:], sol.u_seq[-1:]])
        self.u_prev = u
        return u, sol


def step(ctrl: Controller, x: VehicleState, profile: GradeProfile, lead=None, boundary=None, cfg: MPCConfig | None = None):
    """Receding-horizon law: solve, apply the first input, or brake fully if infeasible."""
    if cfg is not None and cfg != ctrl.cfg:
        ctrl.cfg = cfg
    return ctrl.step(x, profile, lead, boundary)


def with_overrides(cfg: MPCConfig, **kw) -> MPCConfig:
    return replace(cfg, **kw)
