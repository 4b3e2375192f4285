"""Reactive, combinatorial-MPC and genetic-algorithm-MPC controllers.

All three answer the same question: given the zone state at the start of a
horizon and a forecast of its boundary conditions, which setpoint vector
should the zone follow. The MPCs predict with the emulator itself, so their
forecasts of the zone are exact whenever the plant sees no hidden disturbance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Callable, Sequence

import numpy as np

from .emulator import BoundarySample, ZoneParams, ZoneState, simulate_batch
from .comfort import comfort_deviation

CONTROLLER_KINDS = ("reactive", "combinatorial", "ga")
GRID_STEP = 0.5  # degC, GA gene resolution


class PlannerError(RuntimeError):
    pass


class BudgetExceededError(PlannerError):
    """The exhaustive search space is larger than the configured budget."""


@dataclass(frozen=True)
class ObjectiveWeights:
    w_energy: float = 1.0e-3  # per Wh of final energy
    w_comfort: float = 50.0  # per degC*h outside the band while occupied
    w_flex: float = 5.0e-3  # per Wh above the DR cap inside a DR window

    def __post_init__(self) -> None:
        if min(self.w_energy, self.w_comfort, self.w_flex) < 0:
            raise ValueError("objective weights must be >= 0")


@dataclass(frozen=True)
class GaConfig:
    population: int = 40
    generations: int = 60
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    tournament_size: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 1 <= self.tournament_size <= self.population:
            raise ValueError("tournament_size must lie in [1, population]")
        if not (0.0 <= self.crossover_rate <= 1.0 and 0.0 <= self.mutation_rate <= 1.0):
            raise ValueError("crossover_rate and mutation_rate must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Forecast:
    """What a planner sees of the next ``len(boundaries)`` control steps."""

    boundaries: tuple[BoundarySample, ...]
    band: tuple[float, float]
    dr_caps: tuple[float | None, ...] = ()
    start: datetime | None = None
    dt: float = 3600.0

    def __post_init__(self) -> None:
        if self.dr_caps and len(self.dr_caps) != len(self.boundaries):
            raise ValueError("dr_caps must be empty or match the horizon length")

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def occupied(self) -> np.ndarray:
        return np.array([b.occupied for b in self.boundaries], dtype=bool)


@dataclass(frozen=True)
class ControlStrategy:
    setpoints: tuple[float, ...]
    horizon_start: datetime | None = None
    cost: float = math.nan
    energy: float = math.nan
    discomfort: float = math.nan
    evaluated: int = 0
    predicted_t_air: tuple[float, ...] = ()
    predicted_t_env: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.setpoints)


@dataclass(frozen=True)
class StrategyEvaluation:
    cost: float
    feasible: bool
    energy: float
    discomfort: float
    flex_excess: float


@dataclass(frozen=True)
class ReactiveSchedule:
    """Weekly occupancy (168 hourly flags, Monday 00:00 first) and the two setpoints."""

    weekly_occupancy: tuple[bool, ...]
    comfort_setpoint: float = 21.0
    setback: float = 16.0

    def __post_init__(self) -> None:
        if len(self.weekly_occupancy) != 168:
            raise ValueError("weekly_occupancy needs 168 hourly entries")

    def occupied(self, now: datetime) -> bool:
        return bool(self.weekly_occupancy[hour_of_week(now)])


@dataclass(frozen=True)
class ControllerConfig:
    kind: str
    candidates: tuple[float, ...] = (16.0, 19.0, 20.5, 22.0)
    bounds: tuple[float, float] = (16.0, 24.0)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    ga: GaConfig = field(default_factory=GaConfig)
    budget: int = 10**6
    label: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller {self.kind!r}; expected one of {CONTROLLER_KINDS}")
        if not self.candidates:
            raise ValueError("candidate set must be non-empty")
        if not self.bounds[0] < self.bounds[1]:
            raise ValueError("bounds must satisfy min < max")

    @property
    def id(self) -> str:
        return self.label or self.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "label": self.label,
            "candidates": list(self.candidates),
            "bounds": list(self.bounds),
            "weights": vars(self.weights).copy(),
            "ga": vars(self.ga).copy(),
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerConfig":
        data = dict(data)
        unknown = set(data) - {"kind", "label", "candidates", "bounds", "weights", "ga", "budget"}
        if unknown:
            raise ValueError(f"unknown controller key(s): {', '.join(sorted(unknown))}")
        kw: dict = {"kind": data.pop("kind")}
        if "candidates" in data:
            kw["candidates"] = tuple(float(x) for x in data["candidates"])
        if "bounds" in data:
            lo, hi = data["bounds"]
            kw["bounds"] = (float(lo), float(hi))
        if "weights" in data:
            kw["weights"] = ObjectiveWeights(**data["weights"])
        if "ga" in data:
            kw["ga"] = GaConfig(**data["ga"])
        if "budget" in data:
            kw["budget"] = int(data["budget"])
        if data.get("label") is not None:
            kw["label"] = str(data["label"])
        return cls(**kw)


def hour_of_week(t: datetime) -> int:
    return t.weekday() * 24 + t.hour


def reactive_decide(now: datetime, schedule: ReactiveSchedule) -> float:
    return schedule.comfort_setpoint if schedule.occupied(now) else schedule.setback


@dataclass(frozen=True)
class BatchEvaluation:
    cost: np.ndarray
    energy: np.ndarray
    discomfort: np.ndarray
    flex_excess: np.ndarray
    t_air: np.ndarray
    t_env: np.ndarray


def evaluate_batch(
    setpoints: np.ndarray,
    state: ZoneState,
    forecast: Forecast,
    params: ZoneParams,
    weights: ObjectiveWeights,
) -> BatchEvaluation:
    """Score every row of ``setpoints`` (shape (candidates, horizon)).

    Discomfort is occupied-time degree-hours with a trapezoid per step
    between its start and end temperatures; the first start is ``state``.
    Per-step terms are accumulated left to right so a vector scores the same
    bits regardless of how many others share its batch.
    """
    traj = simulate_batch(state, setpoints, forecast.boundaries, params, forecast.dt)
    n_cand, horizon = traj.t_air.shape
    dt_h = forecast.dt / 3600.0
    lower, upper = forecast.band
    occupied = forecast.occupied
    energy = np.zeros(n_cand)
    discomfort = np.zeros(n_cand)
    excess = np.zeros(n_cand)
    dev_start = np.full(n_cand, comfort_deviation(state.t_air, lower, upper))
    for j in range(horizon):
        dev_end = comfort_deviation(traj.t_air[:, j], lower, upper)
        energy = energy + traj.final_wh[:, j]
        if occupied[j]:
            discomfort = discomfort + dt_h * (dev_start + dev_end) / 2.0
        cap = forecast.dr_caps[j] if forecast.dr_caps else None
        if cap is not None:
            excess = excess + np.maximum(traj.final_wh[:, j] - cap * dt_h, 0.0)
        dev_start = dev_end
    cost = weights.w_energy * energy + weights.w_comfort * discomfort + weights.w_flex * excess
    return BatchEvaluation(cost, energy, discomfort, excess, traj.t_air, traj.t_env)


def evaluate_strategy(
    strategy: ControlStrategy | Sequence[float],
    state: ZoneState,
    forecast: Forecast,
    params: ZoneParams,
    weights: ObjectiveWeights,
) -> StrategyEvaluation:
    setpoints = strategy.setpoints if isinstance(strategy, ControlStrategy) else tuple(strategy)
    if len(setpoints) != len(forecast):
        raise ValueError(f"strategy has {len(setpoints)} steps, forecast {len(forecast)}")
    ev = evaluate_batch(np.array([setpoints], dtype=float), state, forecast, params, weights)
    discomfort = float(ev.discomfort[0])
    return StrategyEvaluation(
        cost=float(ev.cost[0]),
        feasible=discomfort == 0.0,
        energy=float(ev.energy[0]),
        discomfort=discomfort,
        flex_excess=float(ev.flex_excess[0]),
    )


def _strategy(vector, ev: BatchEvaluation, row: int, forecast: Forecast, evaluated: int) -> ControlStrategy:
    return ControlStrategy(
        setpoints=tuple(float(x) for x in vector),
        horizon_start=forecast.start,
        cost=float(ev.cost[row]),
        energy=float(ev.energy[row]),
        discomfort=float(ev.discomfort[row]),
        evaluated=evaluated,
        predicted_t_air=tuple(float(x) for x in ev.t_air[row]),
        predicted_t_env=tuple(float(x) for x in ev.t_env[row]),
    )


def select_best(grid: np.ndarray, cost: np.ndarray, energy: np.ndarray, discomfort: np.ndarray) -> int:
    """Row index chosen by the combinatorial ranking rule.

    Feasible rows (zero discomfort) win, ordered by cost, then energy, then
    the setpoint vector lexicographically. Without a feasible row, the
    least-discomfort row wins, then energy, then the vector. The order is
    total, so the answer does not depend on enumeration order.
    """
    feasible = np.flatnonzero(discomfort == 0.0)
    if feasible.size:
        idx, primary, secondary = feasible, cost[feasible], energy[feasible]
    else:
        idx = np.arange(len(grid))
        primary, secondary = discomfort, energy
    columns = [grid[idx, j] for j in reversed(range(grid.shape[1]))]
    order = np.lexsort(columns + [secondary, primary])
    return int(idx[order[0]])


def combinatorial_plan(
    state: ZoneState,
    forecast: Forecast,
    candidates: Sequence[float],
    horizon: int,
    params: ZoneParams,
    weights: ObjectiveWeights,
    budget: int = 10**6,
) -> ControlStrategy:
    if not candidates:
        raise PlannerError("candidate set is empty")
    if horizon != len(forecast):
        raise ValueError(f"horizon {horizon} does not match forecast length {len(forecast)}")
    levels = np.array(sorted(set(float(c) for c in candidates)))
    size = len(levels) ** horizon
    if size > budget:
        raise BudgetExceededError(
            f"{len(levels)}^{horizon} = {size} strategies exceed the enumeration budget {budget}"
        )
    if horizon == 0:
        return ControlStrategy((), forecast.start, 0.0, 0.0, 0.0, 0)
    grid = np.array(list(itertools.product(levels, repeat=horizon)))
    ev = evaluate_batch(grid, state, forecast, params, weights)
    best = select_best(grid, ev.cost, ev.energy, ev.discomfort)
    return _strategy(grid[best], ev, best, forecast, size)


def setpoint_grid(bounds: tuple[float, float], step: float = GRID_STEP) -> np.ndarray:
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("bounds must satisfy min < max")
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return np.arange(first, last + 1) * step


@dataclass
class GaResult:
    genes: np.ndarray
    cost: float
    initial_best: float
    history: list[float]  # best-ever cost after the initial population and each generation
    evaluations: int


def run_ga(
    n_levels: int,
    horizon: int,
    cost_fn: Callable[[np.ndarray], np.ndarray],
    config: GaConfig,
) -> GaResult:
    """Minimize ``cost_fn`` over integer gene vectors in ``[0, n_levels)^horizon``.

    Tournament selection, one-point crossover, per-gene uniform-reset
    mutation and one elite. ``cost_fn`` receives only vectors it has not
    seen before; results are cached so duplicates cost nothing.
    """
    rng = np.random.default_rng(config.seed)
    cache: dict[bytes, float] = {}

    def costs_of(pop: np.ndarray) -> np.ndarray:
        keys = [row.tobytes() for row in pop]
        fresh: dict[bytes, int] = {}
        for i, key in enumerate(keys):
            if key not in cache and key not in fresh:
                fresh[key] = i
        if fresh:
            rows = list(fresh.values())
            for key, value in zip(fresh, cost_fn(pop[rows])):
                cache[key] = float(value)
        return np.array([cache[key] for key in keys])

    pop = rng.integers(0, n_levels, size=(config.population, horizon))
    costs = costs_of(pop)
    first = int(np.argmin(costs))
    best_genes, best_cost = pop[first].copy(), float(costs[first])
    initial_best = best_cost
    history = [best_cost]

    def tournament() -> int:
        entrants = rng.integers(0, config.population, size=config.tournament_size)
        return int(entrants[np.argmin(costs[entrants])])

    for _ in range(config.generations):
        children = [pop[int(np.argmin(costs))].copy()]
        while len(children) < config.population:
            a, b = pop[tournament()].copy(), pop[tournament()].copy()
            if horizon > 1 and rng.random() < config.crossover_rate:
                cut = int(rng.integers(1, horizon))
                a[cut:], b[cut:] = b[cut:].copy(), a[cut:].copy()
            for child in (a, b):
                mask = rng.random(horizon) < config.mutation_rate
                child[mask] = rng.integers(0, n_levels, size=int(mask.sum()))
                if len(children) < config.population:
                    children.append(child)
        pop = np.array(children)
        costs = costs_of(pop)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_genes, best_cost = pop[i].copy(), float(costs[i])
        history.append(best_cost)

    return GaResult(best_genes, best_cost, initial_best, history, len(cache))


def ga_plan(
    state: ZoneState,
    forecast: Forecast,
    bounds: tuple[float, float],
    horizon: int,
    params: ZoneParams,
    weights: ObjectiveWeights,
    ga: GaConfig,
) -> ControlStrategy:
    if horizon != len(forecast):
        raise ValueError(f"horizon {horizon} does not match forecast length {len(forecast)}")
    levels = setpoint_grid(bounds)
    if horizon == 0:
        return ControlStrategy((), forecast.start, 0.0, 0.0, 0.0, 0)

    def cost_fn(genes: np.ndarray) -> np.ndarray:
        return evaluate_batch(levels[genes], state, forecast, params, weights).cost

    result = run_ga(len(levels), horizon, cost_fn, ga)
    vector = levels[result.genes]
    ev = evaluate_batch(vector[None, :], state, forecast, params, weights)
    return _strategy(vector, ev, 0, forecast, result.evaluations)


def plan(
    controller: ControllerConfig,
    state: ZoneState,
    forecast: Forecast,
    schedule: ReactiveSchedule,
    params: ZoneParams,
) -> ControlStrategy:
    horizon = len(forecast)
    if controller.kind == "reactive":
        if forecast.start is None:
            raise PlannerError("the reactive controller needs the forecast start time")
        step = timedelta(seconds=forecast.dt)
        setpoints = tuple(reactive_decide(forecast.start + j * step, schedule) for j in range(horizon))
        return ControlStrategy(setpoints, forecast.start)
    if controller.kind == "combinatorial":
        return combinatorial_plan(
            state, forecast, controller.candidates, horizon, params, controller.weights, controller.budget
        )
    return ga_plan(state, forecast, controller.bounds, horizon, params, controller.weights, controller.ga)


def with_seed(controller: ControllerConfig, seed: int) -> ControllerConfig:
    return replace(controller, ga=replace(controller.ga, seed=seed))
