"""Static figures written next to the CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .safeset import SafeSetBoundary, d_safe  # noqa: E402
from .scenarios import ScenarioLog  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_log(log: ScenarioLog, path, v_ref: float | None = None, title: str = "") -> None:
    """Speeds, gap against safe distance, input and grade over time."""
    fig, ax = plt.subplots(4, 1, figsize=(8, 9), sharex=True)
    ax[0].plot(log.t, log.v_ego, label="ego")
    if np.any(~np.isnan(log.v_lead)):
        ax[0].plot(log.t, log.v_lead, label="lead")
    if v_ref is not None:
        ax[0].axhline(v_ref, color="grey", ls=":", label="v_ref")
    ax[0].set_ylabel("speed [m/s]")
    ax[0].legend(loc="best")
    ax[1].plot(log.t, log.gap, label="gap")
    ax[1].plot(log.t, log.d_safe, label="d_safe", ls="--")
    ax[1].set_ylabel("distance [m]")
    ax[1].legend(loc="best")
    ax[2].plot(log.t, log.u / 1000.0)
    ax[2].set_ylabel("u [kN]")
    ax[3].plot(log.t, log.theta)
    ax[3].set_ylabel("grade [rad]")
    ax[3].set_xlabel("time [s]")
    if title:
        ax[0].set_title(title)
    _save(fig, path)


def plot_boundary(boundary: SafeSetBoundary, path) -> None:
    """Boundary data points with the fitted safe-distance curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    v = np.linspace(0.0, boundary.v_range[1], 200)
    ax.plot(boundary.v_points, boundary.d_min_points, ".", ms=3, label="integration points")
    ax.plot(v, d_safe(boundary, v), label="fit")
    ax.set_xlabel("ego speed [m/s]")
    ax.set_ylabel("safe distance [m]")
    ax.legend(loc="best")
    _save(fig, path)


def plot_comparison(with_grade: ScenarioLog, without_grade: ScenarioLog, path, v_ref: float) -> None:
    fig, ax = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for log, name in ((with_grade, "with grade"), (without_grade, "without grade")):
        ax[0].plot(log.t, log.v_ego, label=name)
        ax[1].plot(log.t, log.u / 1000.0, label=name)
    ax[0].axhline(v_ref, color="grey", ls=":")
    ax[0].set_ylabel("speed [m/s]")
    ax[1].set_ylabel("u [kN]")
    ax[1].set_xlabel("time [s]")
    ax[0].legend(loc="best")
    _save(fig, path)


def plot_fit(t, measured, fitted, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, measured, ".", ms=2, label="measured")
    ax.plot(t, fitted, label="simulated with fit")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("speed [m/s]")
    ax.legend(loc="best")
    _save(fig, path)
