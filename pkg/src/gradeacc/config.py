"""JSON run configuration: defaults, validation and construction of scenario objects.

Inputs are in kN inside the ``mpc`` section (``u_min``, ``u_max``) and in N
everywhere else. Relative file paths are resolved against the config file.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .dynamics import VehicleParams, VehicleState
from .grade import GradeProfile, InputError, load_elevation_csv, load_grade_csv, synthetic_sine
from .mpc import MPCConfig
from .scenarios import BrakeLead, ReplayLead, ScenarioConfig, SineLead, check_initial_gap


class ConfigError(ValueError):
    pass


_ROAD = {
    "type": "flat",  # flat | constant | sine | elevation_csv | grade_csv
    "theta": 0.0,
    "amplitude": 0.05,
    "wavelength": 400.0,
    "length": 5000.0,
    "spacing": 5.0,
    "phase": 0.0,
    "path": None,
    "smoothing_window": 1,
}

DEFAULTS = {
    "vehicle_ego": asdict(VehicleParams()),
    "vehicle_lead": asdict(VehicleParams()),
    "road": {**_ROAD, "lead_road": None},
    "lead_trajectory": {
        "type": "sine",  # sine | replay | brake | absent
        "mean": 15.0,
        "amplitude": 3.0,
        "period": 20.0,
        "phase": 0.0,
        "speed": 15.0,
        "brake_time": 40.0,
        "path": None,
        "s0": 60.0,
        "v0": 15.0,
        "noise": 0.0,
    },
    "mpc": {**asdict(MPCConfig()), "u_min": -3.0, "u_max": 3.0},
    "scenario": {
        "kind": "car_following",  # car_following | switching | intersection
        "duration": 60.0,
        "l_min": 5.0,
        "seed": 0,
        "ego_s0": 0.0,
        "ego_v0": 15.0,
        "mass_mismatch": 0.0,
        "baseline_no_grade": False,
        "dt_int": None,
        "radius": 150.0,
        "ego_center": 300.0,
        "lead_center": 300.0,
    },
}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def resolve(raw: dict, base_dir: Path | None = None) -> dict:
    """Fill in defaults, reject unknown keys and check cross-field limits."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown top-level sections: {', '.join(unknown)}")
    cfg = {name: _merge(DEFAULTS[name], raw.get(name) or {}, name) for name in DEFAULTS}
    lead_road = cfg["road"]["lead_road"]
    if lead_road is not None:
        cfg["road"]["lead_road"] = _merge(_ROAD, lead_road, "road.lead_road")

    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    for section in (cfg["road"], cfg["road"]["lead_road"], cfg["lead_trajectory"]):
        if section is not None and section.get("path"):
            section["path"] = str((base_dir / section["path"]).resolve())

    brake = cfg["vehicle_ego"]["F_brake_max"]
    if abs(cfg["mpc"]["u_min"]) * 1000.0 > brake:
        raise ConfigError(f"mpc.u_min = {cfg['mpc']['u_min']} kN exceeds the ego braking limit F_brake_max = {brake} N")
    return cfg


def load_config(path=None) -> dict:
    if path is None:
        return resolve({})
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return resolve(raw, path.parent)


def _params(section: dict) -> VehicleParams:
    try:
        return VehicleParams(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"vehicle parameters: {exc}") from exc


def build_profile(road: dict) -> GradeProfile:
    kind = road["type"]
    if kind == "flat":
        return GradeProfile.constant(0.0)
    if kind == "constant":
        return GradeProfile.constant(float(road["theta"]))
    if kind == "sine":
        return synthetic_sine(road["amplitude"], road["wavelength"], road["length"], road["spacing"], road["phase"])
    if kind == "elevation_csv":
        return load_elevation_csv(_need_path(road, "road"), int(road["smoothing_window"]))
    if kind == "grade_csv":
        return load_grade_csv(_need_path(road, "road"))
    raise ConfigError(f"road.type must be flat, constant, sine, elevation_csv or grade_csv, got {kind!r}")


def _need_path(section: dict, where: str) -> str:
    if not section.get("path"):
        raise ConfigError(f"{where}.path is required for type {section['type']!r}")
    return section["path"]


def build_lead(lt: dict):
    kind = lt["type"]
    if kind == "absent":
        return None
    if kind == "sine":
        return SineLead(lt["mean"], lt["amplitude"], lt["period"], lt["phase"], lt["brake_time"])
    if kind == "replay":
        return ReplayLead.from_csv(_need_path(lt, "lead_trajectory"), lt["brake_time"])
    if kind == "brake":
        if lt["brake_time"] is None:
            raise ConfigError("lead_trajectory.brake_time is required for type 'brake'")
        return BrakeLead(lt["speed"], lt["brake_time"])
    raise ConfigError(f"lead_trajectory.type must be sine, replay, brake or absent, got {kind!r}")


def build_mpc(section: dict) -> MPCConfig:
    values = dict(section)
    values["u_min"] = section["u_min"] * 1000.0
    values["u_max"] = section["u_max"] * 1000.0
    try:
        return MPCConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mpc: {exc}") from exc


@dataclass(frozen=True)
class Run:
    """Everything a CLI subcommand needs, built from a resolved config."""

    kind: str
    scenario: ScenarioConfig
    lead_road: GradeProfile | None
    radius: float
    ego_center: float
    lead_center: float


def build_run(cfg: dict) -> Run:
    sc = cfg["scenario"]
    lt = cfg["lead_trajectory"]
    if sc["kind"] not in ("car_following", "switching", "intersection"):
        raise ConfigError(f"scenario.kind must be car_following, switching or intersection, got {sc['kind']!r}")
    profile = build_profile(cfg["road"])
    lead_road = build_profile(cfg["road"]["lead_road"]) if cfg["road"]["lead_road"] else None
    lead = build_lead(lt)
    try:
        scenario = ScenarioConfig(
            profile=profile,
            ego0=VehicleState(sc["ego_s0"], sc["ego_v0"]),
            lead=lead,
            lead0=VehicleState(lt["s0"], lt["v0"]) if lead is not None else None,
            lead_profile=lead_road if sc["kind"] != "intersection" else None,
            p_ego=_params(cfg["vehicle_ego"]),
            p_lead=_params(cfg["vehicle_lead"]),
            mpc=build_mpc(cfg["mpc"]),
            l_min=sc["l_min"],
            duration=sc["duration"],
            seed=int(sc["seed"]),
            lead_noise=lt["noise"],
            mass_mismatch=sc["mass_mismatch"],
            baseline_no_grade=bool(sc["baseline_no_grade"]),
            dt_int=sc["dt_int"],
        )
        if sc["kind"] != "intersection":
            check_initial_gap(scenario)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, InputError)):
            raise
        raise ConfigError(f"scenario: {exc}") from exc
    return Run(sc["kind"], scenario, lead_road, float(sc["radius"]), float(sc["ego_center"]), float(sc["lead_center"]))
