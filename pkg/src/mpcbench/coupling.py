"""Lockstep episode loop coupling one controller to the emulator."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

from .controllers import ControllerConfig, PlannerError, plan
from .emulator import DivergenceError, ZoneParams, ZoneState, step
from .scenarios import Scenario, ScenarioError, format_timestamp, parse_timestamp, validate_scenario

logger = logging.getLogger(__name__)

LOG_COLUMNS = (
    "step",
    "timestamp",
    "t_air_start_c",
    "t_air_c",
    "t_env_c",
    "setpoint_c",
    "heat_wh",
    "final_wh",
    "occupied",
    "band_lower_c",
    "band_upper_c",
    "t_out_c",
    "solar_wm2",
    "dr_active",
)


class MatchupError(ValueError):
    pass


@dataclass
class PlanRecord:
    step: int
    horizon: int
    evaluated: int
    wall_time_s: float
    setpoints: tuple[float, ...]
    predicted_t_air: tuple[float, ...] = ()
    predicted_t_env: tuple[float, ...] = ()


@dataclass
class SimulationLog:
    """One row per control step; temperatures are end-of-step values.

    ``t_air_start`` repeats the previous row's ``t_air`` (the initial state on
    the first row) so each row carries both ends of its interval.
    """

    scenario_id: str
    controller: str
    control_step: float
    timestamps: list[datetime] = field(default_factory=list)
    t_air_start: list[float] = field(default_factory=list)
    t_air: list[float] = field(default_factory=list)
    t_env: list[float] = field(default_factory=list)
    setpoint: list[float] = field(default_factory=list)
    heat_wh: list[float] = field(default_factory=list)
    final_wh: list[float] = field(default_factory=list)
    occupied: list[bool] = field(default_factory=list)
    band_lower: list[float] = field(default_factory=list)
    band_upper: list[float] = field(default_factory=list)
    t_out: list[float] = field(default_factory=list)
    solar: list[float] = field(default_factory=list)
    dr_active: list[bool] = field(default_factory=list)
    plans: list[PlanRecord] = field(default_factory=list)
    error: str | None = None

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def ok(self) -> bool:
        return self.error is None

    def rows(self):
        for i in range(len(self)):
            yield {
                "step": i,
                "timestamp": format_timestamp(self.timestamps[i]),
                "t_air_start_c": self.t_air_start[i],
                "t_air_c": self.t_air[i],
                "t_env_c": self.t_env[i],
                "setpoint_c": self.setpoint[i],
                "heat_wh": self.heat_wh[i],
                "final_wh": self.final_wh[i],
                "occupied": int(self.occupied[i]),
                "band_lower_c": self.band_lower[i],
                "band_upper_c": self.band_upper[i],
                "t_out_c": self.t_out[i],
                "solar_wm2": self.solar[i],
                "dr_active": int(self.dr_active[i]),
            }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def plans_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "horizon", "evaluated", "setpoints_c"])
            for rec in self.plans:
                writer.writerow([rec.step, rec.horizon, rec.evaluated, " ".join(repr(x) for x in rec.setpoints)])

    @classmethod
    def from_csv(cls, path: str | Path, scenario_id: str = "", controller: str = "") -> "SimulationLog":
        log = cls(scenario_id, controller, 0.0)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.timestamps.append(parse_timestamp(row["timestamp"]))
                log.t_air_start.append(float(row["t_air_start_c"]))
                log.t_air.append(float(row["t_air_c"]))
                log.t_env.append(float(row["t_env_c"]))
                log.setpoint.append(float(row["setpoint_c"]))
                log.heat_wh.append(float(row["heat_wh"]))
                log.final_wh.append(float(row["final_wh"]))
                log.occupied.append(row["occupied"] == "1")
                log.band_lower.append(float(row["band_lower_c"]))
                log.band_upper.append(float(row["band_upper_c"]))
                log.t_out.append(float(row["t_out_c"]))
                log.solar.append(float(row["solar_wm2"]))
                log.dr_active.append(row["dr_active"] == "1")
        if len(log) > 1:
            log.control_step = (log.timestamps[1] - log.timestamps[0]).total_seconds()
        return log


def run_episode(scenario: Scenario, controller: ControllerConfig, params: ZoneParams) -> SimulationLog:
    """Run ``controller`` against the emulator for the whole scenario.

    ``params`` are the base zone parameters; the scenario's static variables
    are applied on top. Planner and divergence failures end the episode early
    and are reported on ``log.error`` alongside the partial log.
    """
    problems = validate_scenario(scenario, params)
    if problems:
        raise ScenarioError(f"scenario {scenario.id!r} is invalid: " + "; ".join(problems))

    zone = scenario.zone_params(params)
    schedule = scenario.schedule()
    dt = float(scenario.control_step)
    lower, upper = scenario.comfort_band
    dr_caps = scenario.dr_caps()
    log = SimulationLog(scenario.id, controller.id, dt)
    state = ZoneState(scenario.setback, scenario.setback)
    pending: tuple[float, ...] = ()
    plan_start = 0

    for i in range(scenario.duration):
        if scenario.replanning == "receding" or i % scenario.horizon == 0:
            horizon = min(scenario.horizon, scenario.duration - i)
            forecast = scenario.forecast(i, horizon)
            started = time.perf_counter()
            try:
                strategy = plan(controller, state, forecast, schedule, zone)
            except PlannerError as exc:
                log.error = f"step {i}: planner failed: {exc}"
                logger.warning("%s/%s %s", scenario.id, controller.id, log.error)
                return log
            log.plans.append(
                PlanRecord(
                    step=i,
                    horizon=horizon,
                    evaluated=strategy.evaluated,
                    wall_time_s=time.perf_counter() - started,
                    setpoints=strategy.setpoints,
                    predicted_t_air=strategy.predicted_t_air,
                    predicted_t_env=strategy.predicted_t_env,
                )
            )
            pending, plan_start = strategy.setpoints, i

        override = scenario.override_at(i)
        applied = pending[i - plan_start] if override is None else override
        boundary = scenario.boundary(i)
        try:
            new_state, heat_wh, final_wh = step(state, boundary, applied, dt, zone)
        except DivergenceError as exc:
            log.error = f"step {i}: {exc}"
            logger.warning("%s/%s %s", scenario.id, controller.id, log.error)
            return log

        log.timestamps.append(scenario.timestamp(i))
        log.t_air_start.append(state.t_air)
        log.t_air.append(new_state.t_air)
        log.t_env.append(new_state.t_env)
        log.setpoint.append(applied)
        log.heat_wh.append(heat_wh)
        log.final_wh.append(final_wh)
        log.occupied.append(boundary.occupied)
        log.band_lower.append(lower)
        log.band_upper.append(upper)
        log.t_out.append(boundary.t_out)
        log.solar.append(boundary.solar)
        log.dr_active.append(dr_caps[i] is not None)
        state = new_state
    return log


def _episode(args) -> SimulationLog:
    return run_episode(*args)


def run_matchup(
    scenario: Scenario,
    controllers: Sequence[ControllerConfig],
    params: ZoneParams,
    jobs: int = 1,
) -> dict[str, SimulationLog]:
    """Run every controller on an identical fresh episode of ``scenario``."""
    if not controllers:
        raise MatchupError("at least one controller is required")
    ids = [c.id for c in controllers]
    if len(set(ids)) != len(ids):
        raise MatchupError(f"controller ids must be unique, got {ids}")
    if not any(c.kind == "reactive" for c in controllers):
        raise MatchupError("the reactive controller must be part of every matchup (it is the KPI baseline)")
    tasks = [(scenario, c, params) for c in controllers]
    if jobs <= 1:
        logs = [_episode(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            logs = list(pool.map(_episode, tasks))
    return dict(zip(ids, logs))
