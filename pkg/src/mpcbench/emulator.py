"""Two-node RC thermal zone driven by an idealized proportional heater.

States are the air-node and envelope-mass-node temperatures. Time integration
is implicit Euler on fixed substeps, with the heater law solved jointly with
each implicit step, so the scheme stays stable for any heater gain.

The stepping kernel works on numpy arrays. A batch of candidate setpoint
vectors and the single plant trajectory therefore run through the same
elementwise arithmetic, which is what makes MPC prediction exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

T_MIN = -50.0
T_MAX = 80.0


class DivergenceError(RuntimeError):
    """A zone temperature left the plausibility band."""


@dataclass(frozen=True)
class ZoneParams:
    c_air: float = 1.0e6  # J/K, air plus furnishings
    c_env: float = 3.0e7  # J/K
    r_ie: float = 0.002  # K/W
    r_ea: float = 0.01  # K/W
    r_inf: float = 0.025  # K/W
    window_area: float = 4.8  # m2
    shgc: float = 0.5
    solar_split: float = 0.3
    p_max: float = 3500.0  # W
    efficiency: float = 1.0
    k_heater: float = 1.0e4  # W/K
    substep: float = 60.0  # s

    def __post_init__(self) -> None:
        for name in ("c_air", "c_env", "r_ie", "r_ea", "r_inf", "p_max", "efficiency", "substep"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not 0.0 <= self.shgc <= 1.0:
            raise ValueError(f"shgc must lie in [0, 1], got {self.shgc!r}")
        if not 0.0 <= self.solar_split <= 1.0:
            raise ValueError(f"solar_split must lie in [0, 1], got {self.solar_split!r}")
        if self.window_area < 0 or self.k_heater < 0:
            raise ValueError("window_area and k_heater must be >= 0")

    def substeps(self, dt: float) -> int:
        """Number of integration substeps in a control step of ``dt`` seconds."""
        n = round(dt / self.substep)
        if dt <= 0 or n < 1 or not math.isclose(n * self.substep, dt, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"substep {self.substep} s does not divide dt {dt} s")
        return n

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ZoneParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown zone parameter(s): {', '.join(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class ZoneState:
    t_air: float
    t_env: float


@dataclass(frozen=True)
class BoundarySample:
    """Boundary conditions held constant over one control step.

    ``disturbance`` (W on the air node) and ``extra_conductance`` (W/K between
    air and outdoors, e.g. an open window) are plant-only channels; forecasts
    handed to planners zero them.
    """

    t_out: float
    solar: float = 0.0
    internal_gain: float = 0.0
    occupied: bool = False
    disturbance: float = 0.0
    extra_conductance: float = 0.0

    def __post_init__(self) -> None:
        if self.solar < 0 or self.internal_gain < 0:
            raise ValueError("solar and internal_gain must be >= 0")
        if self.extra_conductance < 0:
            raise ValueError("extra_conductance must be >= 0")


def local_heater_power(state: ZoneState, setpoint: float, params: ZoneParams) -> float:
    return min(max(params.k_heater * (setpoint - state.t_air), 0.0), params.p_max)


def advance(t_air, t_env, boundary: BoundarySample, setpoint, dt: float, params: ZoneParams):
    """Integrate one control step on arrays; returns ``(t_air, t_env, heat_wh)``.

    Each substep solves the implicit-Euler system in increment form, so equal
    node and outdoor temperatures with no gains give a bit-exact fixed point.
    The heater output solves ``q = clip(k * (setpoint - t_air_new), 0, p_max)``
    jointly with the step: the air temperature is affine in ``q`` and the
    unclamped law is monotone, so clipping the unclamped solution is exact.
    """
    n = params.substeps(dt)
    h = dt / n
    g_ie = 1.0 / params.r_ie
    g_ao = 1.0 / params.r_inf + boundary.extra_conductance
    g_eo = 1.0 / params.r_ea
    solar_w = params.shgc * params.window_area * boundary.solar
    gain_air = boundary.internal_gain + boundary.disturbance + params.solar_split * solar_w
    gain_env = (1.0 - params.solar_split) * solar_w

    a11 = params.c_air / h + g_ie + g_ao
    a22 = params.c_env / h + g_ie + g_eo
    det = a11 * a22 - g_ie * g_ie
    s_air = a22 / det
    s_env = g_ie / det
    k_eff = params.k_heater / (1.0 + params.k_heater * s_air)
    # increments as linear maps of the three node differences plus a gain term
    air_ie, air_ao, air_eo = g_ie * (a22 - g_ie) / det, a22 * g_ao / det, g_ie * g_eo / det
    env_ie, env_ao, env_eo = g_ie * (g_ie - a11) / det, g_ie * g_ao / det, a11 * g_eo / det
    air_gain = (a22 * gain_air + g_ie * gain_env) / det
    env_gain = (g_ie * gain_air + a11 * gain_env) / det
    t_out = boundary.t_out
    p_max = params.p_max

    t_air = np.asarray(t_air, dtype=float)
    t_env = np.asarray(t_env, dtype=float)
    setpoint = np.asarray(setpoint, dtype=float)
    heat = np.zeros(np.broadcast(t_air, setpoint).shape)
    for _ in range(n):
        x_ie = t_env - t_air
        x_ao = t_out - t_air
        x_eo = t_out - t_env
        d_air = air_ie * x_ie + air_ao * x_ao + air_eo * x_eo + air_gain
        d_env = env_ie * x_ie + env_ao * x_ao + env_eo * x_eo + env_gain
        q = np.minimum(np.maximum(k_eff * (setpoint - t_air - d_air), 0.0), p_max)
        t_air = t_air + d_air + q * s_air
        t_env = t_env + d_env + q * s_env
        heat = heat + q

    _check_band(t_air)
    _check_band(t_env)
    return t_air, t_env, heat * (h / 3600.0)


def _check_band(temps: np.ndarray) -> None:
    if not np.all((temps >= T_MIN) & (temps <= T_MAX)):
        bad = temps[~((temps >= T_MIN) & (temps <= T_MAX))].flat[0]
        raise DivergenceError(f"temperature {bad!r} outside [{T_MIN}, {T_MAX}] degC")


def step(
    state: ZoneState,
    boundary: BoundarySample,
    setpoint: float,
    dt: float,
    params: ZoneParams,
) -> tuple[ZoneState, float, float]:
    """Advance the zone by ``dt`` seconds.

    Returns the new state, the heat delivered (Wh) and the final energy
    consumed (Wh).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    t_air, t_env, heat = advance(state.t_air, state.t_env, boundary, setpoint, dt, params)
    heat_wh = float(heat)
    return ZoneState(float(t_air), float(t_env)), heat_wh, heat_wh / params.efficiency


@dataclass(frozen=True)
class BatchTrajectory:
    """Arrays of shape (candidates, horizon); temperatures are end-of-step."""

    t_air: np.ndarray
    t_env: np.ndarray
    heat_wh: np.ndarray
    final_wh: np.ndarray


def simulate_batch(
    state: ZoneState,
    setpoints: np.ndarray,
    boundaries: Sequence[BoundarySample],
    params: ZoneParams,
    dt: float = 3600.0,
) -> BatchTrajectory:
    setpoints = np.atleast_2d(np.asarray(setpoints, dtype=float))
    n_cand, horizon = setpoints.shape
    if horizon != len(boundaries):
        raise ValueError(f"{horizon} setpoints per vector but {len(boundaries)} boundary samples")
    out = {key: np.empty((n_cand, horizon)) for key in ("t_air", "t_env", "heat")}
    t_air = np.full(n_cand, state.t_air)
    t_env = np.full(n_cand, state.t_env)
    for j, boundary in enumerate(boundaries):
        t_air, t_env, heat = advance(t_air, t_env, boundary, setpoints[:, j], dt, params)
        out["t_air"][:, j] = t_air
        out["t_env"][:, j] = t_env
        out["heat"][:, j] = heat
    return BatchTrajectory(out["t_air"], out["t_env"], out["heat"], out["heat"] / params.efficiency)


def simulate_horizon(
    state: ZoneState,
    setpoints: Sequence[float],
    boundaries: Sequence[BoundarySample],
    params: ZoneParams,
    dt: float = 3600.0,
) -> tuple[list[ZoneState], list[float]]:
    """Fold :func:`step` over a horizon; returns states and final energy (Wh) per step."""
    if len(setpoints) != len(boundaries):
        raise ValueError(f"{len(setpoints)} setpoints but {len(boundaries)} boundary samples")
    states: list[ZoneState] = []
    energy: list[float] = []
    for setpoint, boundary in zip(setpoints, boundaries):
        state, _, final_wh = step(state, boundary, setpoint, dt, params)
        states.append(state)
        energy.append(final_wh)
    return states, energy
