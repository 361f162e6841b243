"""Two-block, single-interface rigs driven by prescribed relative displacement.

The blocks are rigid, so the schedule is applied directly to the interface and
the curves isolate the constitutive response: uniaxial tension (pure opening)
and direct shear (slip under a constant compressive normal traction). A
proportional mixed-mode path is available from the library only.
"""

from __future__ import annotations

import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .constitutive import (
    InterfaceState,
    MaterialParams,
    cohesion,
    damage,
    degraded_normal_stiffness,
    tensile_strength,
    update_interface,
)

_SCRIPTS_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _SCRIPTS_DIR not in sys.path:
    sys.path.append(_SCRIPTS_DIR)

try:
    from curves import MIXED_COLUMNS, SHEAR_COLUMNS, TENSION_COLUMNS, CurveRecord  # type: ignore
except Exception:  # pragma: no cover
    from scripts.curves import MIXED_COLUMNS, SHEAR_COLUMNS, TENSION_COLUMNS, CurveRecord  # type: ignore

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 2000
DEFAULT_SUBSTEPS = 10
DEFAULT_SHEAR_PRELOAD = -1.0e6
# Schedules reaching further than this are a unit mistake, not an experiment.
MAX_TOTAL_DISPLACEMENT = 1.0


class ScheduleError(ValueError):
    """Load schedule that cannot be run."""


@dataclass(frozen=True)
class LoadSchedule:
    """Displacement-controlled schedule for one patch test.

    ``displacement_increment`` is the opening (tension) or slip (shear) added
    per step. ``step_time`` only labels the pseudo-time column.
    """

    mode: str
    steps: int = DEFAULT_STEPS
    displacement_increment: float = 0.0
    normal_preload: float = 0.0
    n_substeps: int = DEFAULT_SUBSTEPS
    step_time: float = 1.0

    def __post_init__(self):
        if self.mode not in ("tension", "shear"):
            raise ScheduleError(f"mode must be 'tension' or 'shear', got {self.mode!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ScheduleError(f"steps must be a positive integer, got {self.steps!r}")
        if int(self.n_substeps) != self.n_substeps or self.n_substeps < 1:
            raise ScheduleError(f"n_substeps must be a positive integer, got {self.n_substeps!r}")
        for name in ("displacement_increment", "normal_preload", "step_time"):
            if not math.isfinite(getattr(self, name)):
                raise ScheduleError(f"{name} must be finite, got {getattr(self, name)!r}")
        if abs(self.displacement_increment) * self.steps > MAX_TOTAL_DISPLACEMENT:
            raise ScheduleError(
                f"total displacement {abs(self.displacement_increment) * self.steps:.3g} m "
                f"exceeds {MAX_TOTAL_DISPLACEMENT} m; check the units"
            )
        if self.mode == "tension" and self.normal_preload != 0.0:
            raise ScheduleError("tension mode takes no normal preload")
        if self.mode == "shear" and self.normal_preload > 0.0:
            raise ScheduleError(
                f"shear mode needs a compressive (<= 0) normal preload, got {self.normal_preload!r} Pa"
            )

    @classmethod
    def tension(cls, total_opening: float, steps: int = DEFAULT_STEPS,
                n_substeps: int = DEFAULT_SUBSTEPS) -> "LoadSchedule":
        return cls("tension", steps, total_opening / steps, 0.0, n_substeps)

    @classmethod
    def shear(cls, total_slip: float, steps: int = DEFAULT_STEPS,
              normal_preload: float = DEFAULT_SHEAR_PRELOAD,
              n_substeps: int = DEFAULT_SUBSTEPS) -> "LoadSchedule":
        return cls("shear", steps, total_slip / steps, normal_preload, n_substeps)

    @property
    def total_displacement(self) -> float:
        return self.displacement_increment * self.steps


def _tension_row(step: int, t: float, p: MaterialParams, s: InterfaceState) -> list[float]:
    return [
        step, t, float(s.u_n), float(s.sigma_n), float(s.u_ieff), float(s.damage),
        float(s.alpha), float(degraded_normal_stiffness(p, s.u_ieff)),
        float(tensile_strength(p, s.u_ieff)),
    ]


def _shear_row(step: int, t: float, p: MaterialParams, s: InterfaceState) -> list[float]:
    return [
        step, t, float(s.u_s), float(s.tau), float(s.u_ieff), float(s.damage),
        float(s.alpha), float(s.alpha) * p.ks0, float(cohesion(p, s.u_ieff)),
    ]


def run_tension_patch(p: MaterialParams, sched: LoadSchedule) -> CurveRecord:
    """Pure opening at a fixed rate; one row per step plus the initial state."""
    if sched.mode != "tension":
        raise ScheduleError(f"run_tension_patch needs a tension schedule, got {sched.mode!r}")
    state = InterfaceState.virgin()
    rows = [_tension_row(0, 0.0, p, state)]
    for k in range(1, sched.steps + 1):
        state, _ = update_interface(state, p, sched.displacement_increment, 0.0, sched.n_substeps)
        rows.append(_tension_row(k, k * sched.step_time, p, state))
    logger.debug("tension patch: %d steps, dissipated %.6g J/m2", sched.steps, float(state.dissipated))
    return CurveRecord(TENSION_COLUMNS, np.asarray(rows, dtype=float),
                       dissipated=float(state.dissipated), kind="tension")


def preload_correction(p: MaterialParams, state: InterfaceState, preload: float) -> float:
    """Opening increment that brings sigma_n back to the preload (only dilation moves it).

    A fully damaged open interface has no normal stiffness; the correction is
    then taken at kn0.
    """
    alpha = float(state.alpha)
    return (preload - float(state.sigma_n)) / ((alpha if alpha > 0.0 else 1.0) * p.kn0)


def run_shear_patch(p: MaterialParams, sched: LoadSchedule) -> CurveRecord:
    """Slip at a fixed rate while the normal traction is held at the preload.

    Friction is switched off, so the Tresca form of the surface applies and
    the peak shear traction is the cohesion.
    """
    if sched.mode != "shear":
        raise ScheduleError(f"run_shear_patch needs a shear schedule, got {sched.mode!r}")
    p = p.with_friction(0.0)
    state, _ = update_interface(InterfaceState.virgin(), p, sched.normal_preload / p.kn0, 0.0)
    rows = [_shear_row(0, 0.0, p, state)]
    for k in range(1, sched.steps + 1):
        du_n = preload_correction(p, state, sched.normal_preload)
        state, _ = update_interface(state, p, du_n, sched.displacement_increment, sched.n_substeps)
        rows.append(_shear_row(k, k * sched.step_time, p, state))
    logger.debug("shear patch: %d steps, dissipated %.6g J/m2", sched.steps, float(state.dissipated))
    return CurveRecord(SHEAR_COLUMNS, np.asarray(rows, dtype=float),
                       dissipated=float(state.dissipated), kind="shear")


def run_mixed_patch(p: MaterialParams, steps: int, opening_increment: float, slip_increment: float,
                    n_substeps: int = DEFAULT_SUBSTEPS, step_time: float = 1.0) -> CurveRecord:
    """Opening and slip driven together in a fixed ratio."""
    if int(steps) != steps or steps < 1:
        raise ScheduleError(f"steps must be a positive integer, got {steps!r}")
    for name, value in (("opening_increment", opening_increment), ("slip_increment", slip_increment)):
        if not math.isfinite(value):
            raise ScheduleError(f"{name} must be finite, got {value!r}")
        if abs(value) * steps > MAX_TOTAL_DISPLACEMENT:
            raise ScheduleError(f"total {name[:-10]} exceeds {MAX_TOTAL_DISPLACEMENT} m; check the units")
    state = InterfaceState.virgin()

    def row(k: int, s: InterfaceState) -> list[float]:
        return [k, k * step_time, float(s.u_n), float(s.u_s), float(s.sigma_n), float(s.tau),
                float(s.u_ieff), float(s.damage), float(s.alpha)]

    rows = [row(0, state)]
    for k in range(1, int(steps) + 1):
        state, _ = update_interface(state, p, opening_increment, slip_increment, n_substeps)
        rows.append(row(k, state))
    return CurveRecord(MIXED_COLUMNS, np.asarray(rows, dtype=float),
                       dissipated=float(state.dissipated), kind="mixed")


def _softened_inelastic(u, strength0: float, k0: float, w: float) -> np.ndarray:
    """Inelastic displacement on the linear softening branch at total displacement u."""
    u = np.asarray(u, dtype=float)
    peak = strength0 / k0
    return np.where(u <= peak, 0.0, (u - peak) / (1.0 - strength0 / (w * k0)))


def tension_envelope(p: MaterialParams, openings, step_time: float = 1.0) -> CurveRecord:
    """Closed-form tension curve sampled at the given openings."""
    u = np.asarray(openings, dtype=float)
    ui = np.minimum(_softened_inelastic(u, p.sigma_t0, p.kn0, p.w_sigma), p.w_sigma)
    st = np.asarray(tensile_strength(p, ui), dtype=float)
    sigma = np.where(ui > 0.0, st, p.kn0 * np.maximum(u, 0.0))
    dmg = np.asarray(damage(p, ui), dtype=float)
    alpha = np.where(u > 0.0, 1.0 - dmg, 1.0)
    k_ns = np.asarray(degraded_normal_stiffness(p, ui), dtype=float)
    steps = np.arange(u.size, dtype=float)
    rows = np.column_stack([steps, steps * step_time, u, sigma, ui, dmg, alpha, k_ns, st])
    return CurveRecord(TENSION_COLUMNS, rows, dissipated=float(np.trapezoid(sigma, ui)) if u.size else 0.0,
                       kind="tension")


def shear_envelope(p: MaterialParams, slips, step_time: float = 1.0) -> CurveRecord:
    """Closed-form direct-shear curve (zero friction) sampled at the given slips."""
    s = np.asarray(slips, dtype=float)
    mag = np.abs(s)
    ui = _softened_inelastic(mag, p.c0, p.ks0, p.w_c)
    ui = np.where(ui >= p.w_c, mag, ui)
    c = np.asarray(cohesion(p, ui), dtype=float)
    tau = np.sign(s) * np.where(ui > 0.0, c, p.ks0 * mag)
    dmg = np.asarray(damage(p, ui), dtype=float)
    steps = np.arange(s.size, dtype=float)
    rows = np.column_stack([steps, steps * step_time, s, tau, ui, dmg, np.ones_like(s),
                            np.full_like(s, p.ks0), c])
    return CurveRecord(SHEAR_COLUMNS, rows, dissipated=float(np.trapezoid(np.abs(tau), ui)) if s.size else 0.0,
                       kind="shear")


def envelope_for(p: MaterialParams, sched: LoadSchedule) -> CurveRecord:
    """Closed-form reference sampled at the schedule's own displacements."""
    applied = np.arange(sched.steps + 1, dtype=float) * sched.displacement_increment
    if sched.mode == "tension":
        return tension_envelope(p, applied, sched.step_time)
    return shear_envelope(p, applied, sched.step_time)
