"""Closed-loop simulation: car following, intersection projection and CC/ACC switching.

The lead is a physical vehicle that tracks a scripted speed with its own force
limits, so a scripted "full brake" is exactly the manoeuvre the safe set
assumes. Its whole trajectory is computed up front; the controller receives
the true future samples (ideal V2V), optionally with uniform noise on speed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import VehicleParams, VehicleState, step_euler, steady_state_force
from .grade import GradeProfile, InputError, synthetic_sine
from .mpc import FALLBACK, Controller, LeadPrediction, MPCConfig
from .safeset import BoundaryCache, d_safe

LOG_HEADER = ("t_s", "s_ego_m", "v_ego_mps", "s_lead_m", "v_lead_mps", "u_N", "gap_m", "d_safe_m", "theta_rad", "status")
VIOLATION = "violation"
LEAD_TIME_CONSTANT = 1.0  # s, speed-tracking loop of the scripted lead


class SafetyViolation(RuntimeError):
    """Gap fell to l_min or below; ``log`` holds the run up to that step."""

    def __init__(self, message: str, log: "ScenarioLog"):
        super().__init__(message)
        self.log = log


# lead scripts


@dataclass(frozen=True)
class SineLead:
    mean: float
    amplitude: float
    period: float
    phase: float = 0.0
    brake_time: float | None = None

    def reference(self, t: float) -> float:
        return max(0.0, self.mean + self.amplitude * math.sin(2 * math.pi * t / self.period + self.phase))


@dataclass(frozen=True)
class ReplayLead:
    """Piecewise-linear speed recording; held at the end values outside its span."""

    times: tuple[float, ...]
    speeds: tuple[float, ...]
    brake_time: float | None = None

    def __post_init__(self):
        if len(self.times) != len(self.speeds) or len(self.times) < 1:
            raise InputError("replay needs matching, nonempty time and speed columns")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise InputError("replay times must be strictly increasing")
        if any(v < 0 for v in self.speeds):
            raise InputError("replay speeds must be >= 0")

    def reference(self, t: float) -> float:
        return float(np.interp(t, self.times, self.speeds))

    @classmethod
    def from_csv(cls, path, brake_time: float | None = None) -> "ReplayLead":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None or tuple(h.strip() for h in got) != ("time_s", "velocity_mps"):
                raise InputError(f"{path}: expected header 'time_s,velocity_mps', got {','.join(got or [])!r}")
            rows = [(float(a), float(b)) for a, b in reader]
        if not rows:
            raise InputError(f"{path}: no data rows")
        t, v = zip(*rows)
        return cls(tuple(t), tuple(v), brake_time)


@dataclass(frozen=True)
class BrakeLead:
    """Constant speed, then full braking from ``brake_time`` on."""

    speed: float
    brake_time: float

    def reference(self, t: float) -> float:
        return self.speed


def lead_trajectory(script, lead0: VehicleState, profile: GradeProfile, p: VehicleParams, dt: float, n: int):
    """Positions and speeds of the scripted lead at ``k*dt``, k = 0..n-1."""
    s = np.empty(n)
    v = np.empty(n)
    x = lead0
    for k in range(n):
        s[k], v[k] = x.s, x.v
        t = k * dt
        theta = profile.scalar(x.s)
        if script.brake_time is not None and t >= script.brake_time:
            u = -p.F_brake_max
        else:
            target = script.reference(t)
            u = steady_state_force(x.v, theta, p) + p.m * (target - x.v) / LEAD_TIME_CONSTANT
            u = min(max(u, -p.F_brake_max), p.F_traction_max)
        x = step_euler(x, u, theta, dt, p)
    return s, v


# configuration and log


@dataclass(frozen=True)
class ScenarioConfig:
    profile: GradeProfile
    ego0: VehicleState
    lead: SineLead | ReplayLead | BrakeLead | None = None
    lead0: VehicleState | None = None
    lead_profile: GradeProfile | None = None
    p_ego: VehicleParams = field(default_factory=VehicleParams)
    p_lead: VehicleParams = field(default_factory=VehicleParams)
    mpc: MPCConfig = field(default_factory=MPCConfig)
    l_min: float = 5.0
    duration: float = 60.0
    seed: int = 0
    lead_noise: float = 0.0
    mass_mismatch: float = 0.0
    baseline_no_grade: bool = False
    dt_int: float | None = None
    stop_on_violation: bool = True
    stop_when_halted: bool = True

    def __post_init__(self):
        if (self.lead is None) != (self.lead0 is None):
            raise ValueError("lead script and initial lead state must be given together")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if abs(self.mass_mismatch) > 0.1 + 1e-12:
            raise ValueError("mass_mismatch must lie within +-10%")
        if self.lead_noise < 0:
            raise ValueError("lead_noise must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.mpc.dt))

    @property
    def safe_set_dt(self) -> float:
        # integrate the boundary at the plant step so it certifies the Euler plant itself
        return self.dt_int if self.dt_int is not None else self.mpc.dt


@dataclass
class ScenarioLog:
    t: np.ndarray
    s_ego: np.ndarray
    v_ego: np.ndarray
    s_lead: np.ndarray
    v_lead: np.ndarray
    u: np.ndarray
    gap: np.ndarray
    d_safe: np.ndarray
    theta: np.ndarray
    status: list[str]

    def __len__(self):
        return self.t.size

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self) > 1 else float("nan")

    @property
    def violated(self) -> bool:
        return VIOLATION in self.status

    @classmethod
    def from_records(cls, records) -> "ScenarioLog":
        cols = list(zip(*records)) if records else [()] * len(LOG_HEADER)
        arrays = [np.array(c, dtype=float) for c in cols[:-1]]
        return cls(*arrays, status=list(cols[-1]))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_HEADER)
            cols = (self.t, self.s_ego, self.v_ego, self.s_lead, self.v_lead, self.u, self.gap, self.d_safe, self.theta)
            for i in range(len(self)):
                w.writerow([_fmt(c[i]) for c in cols] + [self.status[i]])

    @classmethod
    def from_csv(cls, path) -> "ScenarioLog":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            got = next(reader, None)
            if got is None or tuple(h.strip() for h in got) != LOG_HEADER:
                raise InputError(f"{path}: expected header {','.join(LOG_HEADER)!r}, got {','.join(got or [])!r}")
            records = [tuple(_parse(x) for x in row[:-1]) + (row[-1],) for row in reader]
        return cls.from_records(records)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def _parse(x: str) -> float:
    return float("nan") if x == "" else float(x)


# simulation core


def _run(cfg: ScenarioConfig, lead_s=None, lead_v=None, visible=None) -> ScenarioLog:
    """Shared loop. ``visible(k, x)`` says whether the ego controller sees the lead at step k."""
    mpc_cfg = cfg.mpc
    dt, N = mpc_cfg.dt, mpc_cfg.N
    p_plant = replace(cfg.p_ego, m=cfg.p_ego.m * (1.0 + cfg.mass_mismatch))
    # the boundary may only assume braking the controller can actually command
    p_ego_safe = replace(cfg.p_ego, F_brake_max=min(cfg.p_ego.F_brake_max, -mpc_cfg.u_min))
    true_ego_prof = cfg.profile
    true_lead_prof = cfg.lead_profile or cfg.profile
    if cfg.baseline_no_grade:
        flat = GradeProfile.constant(0.0)
        ctrl_ego_prof = ctrl_lead_prof = flat
    else:
        ctrl_ego_prof, ctrl_lead_prof = true_ego_prof, true_lead_prof

    has_lead = lead_s is not None
    ctrl_cache = true_cache = None
    if has_lead:
        args = (cfg.p_lead, p_ego_safe, mpc_cfg.v_max, cfg.safe_set_dt, cfg.l_min)
        true_cache = BoundaryCache(true_lead_prof, *args, ego_profile=true_ego_prof)
        ctrl_cache = BoundaryCache(ctrl_lead_prof, *args, ego_profile=ctrl_ego_prof) if cfg.baseline_no_grade else true_cache

    rng = np.random.default_rng(cfg.seed)
    ctrl = Controller(mpc_cfg, cfg.p_ego)
    x = cfg.ego0
    records = []
    nan = float("nan")
    for k in range(cfg.n_steps + 1):
        t = k * dt
        theta = true_ego_prof.scalar(x.s)
        seen = has_lead and (visible is None or visible(k, x))
        if seen:
            gap = float(lead_s[k] - x.s)
            ds = float(d_safe(true_cache.get(lead_s[k], lead_v[k]), x.v))
            if gap <= cfg.l_min:
                records.append((t, x.s, x.v, lead_s[k], lead_v[k], mpc_cfg.u_min, gap, ds, theta, VIOLATION))
                log = ScenarioLog.from_records(records)
                if cfg.stop_on_violation:
                    raise SafetyViolation(f"gap {gap:.3f} m <= l_min at t={t:.1f} s", log)
                return log
            v_pred = lead_v[k : k + N + 1].copy()
            if cfg.lead_noise > 0:
                v_pred[1:] = np.maximum(0.0, v_pred[1:] + rng.uniform(-cfg.lead_noise, cfg.lead_noise, N))
            pred = LeadPrediction(lead_s[k : k + N + 1], v_pred)
            u, sol = ctrl.step(x, ctrl_ego_prof, pred, ctrl_cache)
            records.append((t, x.s, x.v, lead_s[k], lead_v[k], u, gap, ds, theta, sol.status))
        else:
            u, sol = ctrl.step(x, ctrl_ego_prof)
            ls = lead_s[k] if has_lead else nan
            lv = lead_v[k] if has_lead else nan
            records.append((t, x.s, x.v, ls, lv, u, ls - x.s, nan, theta, sol.status))
        if cfg.stop_when_halted and has_lead and x.v == 0.0 and lead_v[k] == 0.0 and cfg.lead.brake_time is not None and t >= cfg.lead.brake_time:
            break
        x = step_euler(x, u, theta, dt, p_plant)
    return ScenarioLog.from_records(records)


def _lead_arrays(cfg: ScenarioConfig, profile: GradeProfile, lead0: VehicleState):
    n = cfg.n_steps + cfg.mpc.N + 2
    return lead_trajectory(cfg.lead, lead0, profile, cfg.p_lead, cfg.mpc.dt, n)


def check_initial_gap(cfg: ScenarioConfig) -> None:
    # only meaningful when the lead shares the ego's road; at a crossing it may start farther out
    if cfg.lead0 is not None and cfg.lead0.s - cfg.ego0.s <= cfg.l_min:
        raise ValueError("initial gap must exceed l_min")


def simulate_car_following(cfg: ScenarioConfig) -> ScenarioLog:
    """Ego under MPC behind a scripted lead (or alone, if ``cfg.lead`` is None)."""
    if cfg.lead is None:
        return _run(cfg)
    check_initial_gap(cfg)
    s, v = _lead_arrays(cfg, cfg.lead_profile or cfg.profile, cfg.lead0)
    return _run(cfg, s, v)


@dataclass(frozen=True)
class IntersectionProjection:
    s: float
    v: float
    gap: float

    @property
    def state(self) -> VehicleState:
        return VehicleState(self.s, self.v)

    def conflict(self, l_min: float = 5.0) -> bool:
        return self.gap <= l_min


def project_lead_for_intersection(ego_dist_to_center: float, lead_dist_to_center: float, lead_v: float, center: float = 0.0) -> IntersectionProjection:
    """Virtual lead on the ego's axis, where ``center`` is the ego-axis coordinate of the crossing.

    Distances are measured toward the centre and turn negative once a vehicle has passed it.
    """
    return IntersectionProjection(
        s=center - lead_dist_to_center,
        v=float(lead_v),
        gap=float(ego_dist_to_center - lead_dist_to_center),
    )


def simulate_intersection(
    cfg: ScenarioConfig,
    lead_road: GradeProfile,
    radius: float,
    ego_center: float,
    lead_center: float,
) -> ScenarioLog:
    """Ego yields to a crossing lead once both are within ``radius`` of the centre.

    ``cfg.lead0.s`` is the lead's coordinate on its own road (centre at
    ``lead_center``); the log reports the projected lead on the ego's axis.
    """
    if cfg.lead is None:
        raise ValueError("the intersection scenario needs a lead")
    ego_d0 = ego_center - cfg.ego0.s
    lead_d0 = lead_center - cfg.lead0.s
    if abs(ego_d0) < radius or abs(lead_d0) < radius:
        if not math.isinf(radius):
            raise ValueError("both vehicles must start outside the communication radius")
    s_own, v = _lead_arrays(cfg, lead_road, cfg.lead0)
    offset = ego_center - lead_center
    s_virtual = s_own + offset
    # the lead's road as seen from the ego axis, for the lead's braking in the safe set
    road_on_ego_axis = GradeProfile(lead_road.positions + offset, lead_road.grades) if offset else lead_road
    proj_cfg = replace(cfg, lead_profile=road_on_ego_axis, lead0=VehicleState(cfg.lead0.s + offset, cfg.lead0.v))

    active = [False]

    def visible(k, x):
        # communication latches on once both vehicles are inside the circle
        if not active[0]:
            active[0] = abs(ego_center - x.s) < radius and abs(lead_center - s_own[k]) < radius
        return active[0]

    return _run(proj_cfg, s_virtual, v, visible)


def simulate_switching(cfg: ScenarioConfig | None = None) -> ScenarioLog:
    """Lead that recedes, slows below v_ref, then speeds away again.

    Nothing here selects a mode: the same controller runs throughout and the
    safety rows only bind while the lead is close.
    """
    cfg = cfg or switching_scenario()
    if cfg.lead is None:
        raise ValueError("the switching scenario needs a lead")
    return simulate_car_following(cfg)


# shipped scenarios


def hilly_profile(seed: int, max_amplitude: float = 0.08, length: float = 4000.0) -> GradeProfile:
    """Seeded sinusoidal road with amplitude up to ``max_amplitude`` rad."""
    rng = np.random.default_rng(seed)
    amplitude = rng.uniform(0.3, 1.0) * max_amplitude
    wavelength = rng.uniform(200.0, 800.0)
    phase = rng.uniform(0.0, 2 * math.pi)
    return synthetic_sine(amplitude, wavelength, length, 5.0, phase)


def car_following_scenario(seed: int, max_amplitude: float = 0.08, **overrides) -> ScenarioConfig:
    """Lead oscillates around 15 m/s, then brakes fully to a stop at t = 40 s."""
    rng = np.random.default_rng(seed + 10_000)
    cfg = ScenarioConfig(
        profile=hilly_profile(seed, max_amplitude),
        ego0=VehicleState(0.0, 15.0),
        lead=SineLead(15.0, 3.0, float(rng.uniform(12.0, 24.0)), float(rng.uniform(0, 2 * math.pi)), brake_time=40.0),
        lead0=VehicleState(60.0, 15.0),
        duration=60.0,
        seed=seed,
    )
    return replace(cfg, **overrides)


def downhill_braking_scenario(**overrides) -> ScenarioConfig:
    """Steady following down a 6% grade, where a flat-road safe set is too short."""
    cfg = ScenarioConfig(
        profile=GradeProfile.constant(-0.06),
        ego0=VehicleState(0.0, 20.0),
        lead=BrakeLead(18.0, brake_time=45.0),
        lead0=VehicleState(120.0, 18.0),
        mpc=MPCConfig(v_ref=25.0),
        duration=60.0,
    )
    return replace(cfg, **overrides)


def switching_scenario(**overrides) -> ScenarioConfig:
    cfg = ScenarioConfig(
        profile=GradeProfile.flat(),
        ego0=VehicleState(0.0, 20.0),
        lead=ReplayLead((0.0, 30.0, 40.0, 110.0, 120.0), (25.0, 25.0, 12.0, 12.0, 26.0)),
        lead0=VehicleState(80.0, 25.0),
        mpc=MPCConfig(v_ref=20.0),
        duration=170.0,
    )
    return replace(cfg, **overrides)


def hilly_segment_scenario(segment: int, **overrides) -> ScenarioConfig:
    """One of the comparison segments: seeded hills, lead drifting around v_ref."""
    rng = np.random.default_rng(500 + segment)
    cfg = ScenarioConfig(
        profile=hilly_profile(500 + segment, 0.06),
        ego0=VehicleState(0.0, 20.0),
        lead=SineLead(20.0, 2.0, float(rng.uniform(20.0, 40.0)), float(rng.uniform(0, 2 * math.pi))),
        lead0=VehicleState(70.0, 20.0),
        duration=100.0,
        seed=segment,
    )
    return replace(cfg, **overrides)
