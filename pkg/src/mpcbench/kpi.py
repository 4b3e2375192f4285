"""Energy, primary-energy, cost, comfort and flexibility KPIs from simulation logs.

Relative KPIs compare a log against the reactive baseline log of the same
scenario. Comfort counts occupied steps only, using both the start and end
temperature of each step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .comfort import comfort_deviation
from .scenarios import DrEvent, Period, Scenario, period_value

if TYPE_CHECKING:
    from .coupling import SimulationLog


class KpiError(ValueError):
    pass


class UndefinedKpiError(KpiError):
    """The baseline denominator is zero, so the relative KPI has no value."""


class NoEventError(KpiError):
    pass


BASELINE = "reactive"
NOT_APPLICABLE = "not applicable"
REPORT_FIELDS = (
    "energy_kwh",
    "energy_savings_pct",
    "pe_savings_pct",
    "cost",
    "cost_savings_pct",
    "pct_time_outside_comfort",
    "total_degree_hours",
    "peak_power_reduction_pct",
    "candidates_evaluated",
    "planning_calls",
)


def _check_pair(log: "SimulationLog", baseline_log: "SimulationLog") -> None:
    if len(log) != len(baseline_log):
        raise KpiError(f"log lengths differ: {len(log)} vs {len(baseline_log)}")


def _relative_savings(value: float, base: float) -> float:
    if base == 0:
        raise UndefinedKpiError("baseline value is zero")
    return 100.0 * (base - value) / base


def total_energy_wh(log: "SimulationLog") -> float:
    return math.fsum(log.final_wh)


def energy_savings_pct(log: "SimulationLog", baseline_log: "SimulationLog") -> float:
    _check_pair(log, baseline_log)
    return _relative_savings(total_energy_wh(log), total_energy_wh(baseline_log))


def primary_energy_wh(log: "SimulationLog", pe_factor: float | Sequence[Period]) -> float:
    if isinstance(pe_factor, (int, float)):
        if not pe_factor > 0:
            raise KpiError("pe_factor must be > 0")
        return pe_factor * total_energy_wh(log)
    return math.fsum(e * period_value(pe_factor, t) for e, t in zip(log.final_wh, log.timestamps))


def primary_energy_savings_pct(
    log: "SimulationLog", baseline_log: "SimulationLog", pe_factor: float | Sequence[Period]
) -> float:
    _check_pair(log, baseline_log)
    return _relative_savings(primary_energy_wh(log, pe_factor), primary_energy_wh(baseline_log, pe_factor))


def cost(log: "SimulationLog", tariff: Sequence[Period]) -> float:
    """Energy cost with ``tariff`` prices per kWh of final energy."""
    return math.fsum(e * period_value(tariff, t) for e, t in zip(log.final_wh, log.timestamps)) / 1000.0


def cost_savings_pct(log: "SimulationLog", baseline_log: "SimulationLog", tariff: Sequence[Period]) -> float:
    _check_pair(log, baseline_log)
    return _relative_savings(cost(log, tariff), cost(baseline_log, tariff))


def _outside_steps(log: "SimulationLog") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    occupied = np.asarray(log.occupied, dtype=bool)
    lower = np.asarray(log.band_lower, dtype=float)
    upper = np.asarray(log.band_upper, dtype=float)
    dev_start = comfort_deviation(np.asarray(log.t_air_start, dtype=float), lower, upper)
    dev_end = comfort_deviation(np.asarray(log.t_air, dtype=float), lower, upper)
    return occupied, dev_start, dev_end


def has_occupancy(log: "SimulationLog") -> bool:
    return any(log.occupied)


def pct_time_outside_comfort(log: "SimulationLog") -> float:
    """Share of occupied steps whose start or end temperature is outside the band.

    Returns 0 when no step is occupied; see :func:`has_occupancy`.
    """
    if len(log) == 0:
        raise KpiError("empty log")
    occupied, dev_start, dev_end = _outside_steps(log)
    n_occupied = int(occupied.sum())
    if n_occupied == 0:
        return 0.0
    outside = occupied & ((dev_start > 0) | (dev_end > 0))
    return 100.0 * int(outside.sum()) / n_occupied


def total_degree_hours(log: "SimulationLog") -> float:
    """Occupied-time integral of the band deviation, trapezoid per step (degC*h)."""
    if len(log) == 0:
        raise KpiError("empty log")
    occupied, dev_start, dev_end = _outside_steps(log)
    dt_h = log.control_step / 3600.0
    total = 0.0
    for i in np.flatnonzero(occupied):
        total += dt_h * (dev_start[i] + dev_end[i]) / 2.0
    return float(total)


def dr_steps(dr_events: Iterable[DrEvent], n: int) -> list[int]:
    steps = sorted({i for e in dr_events for i in e.steps() if 0 <= i < n})
    return steps


def peak_power_w(log: "SimulationLog", steps: Sequence[int]) -> float:
    dt_h = log.control_step / 3600.0
    return max(log.final_wh[i] for i in steps) / dt_h


def peak_power_reduction_pct(
    log: "SimulationLog", baseline_log: "SimulationLog", dr_events: Sequence[DrEvent]
) -> float:
    """Reduction of the peak mean-per-step final power inside the DR windows."""
    if not dr_events:
        raise NoEventError("no demand-response event in this scenario")
    _check_pair(log, baseline_log)
    steps = dr_steps(dr_events, len(log))
    if not steps:
        raise NoEventError("demand-response events fall outside the log")
    return _relative_savings(peak_power_w(log, steps), peak_power_w(baseline_log, steps))


@dataclass
class KpiReport:
    controller: str
    scenario_id: str
    energy_kwh: float | None = None
    energy_savings_pct: float | None = None
    pe_savings_pct: float | None = None
    cost: float | None = None
    cost_savings_pct: float | None = None
    pct_time_outside_comfort: float | None = None
    total_degree_hours: float | None = None
    peak_power_reduction_pct: float | None = None
    planner_mean_time_s: float | None = None
    candidates_evaluated: int = 0
    planning_calls: int = 0
    historical_data_required: str = NOT_APPLICABLE
    flags: dict[str, str] = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        """Serializable form; wall-clock timing is left out unless asked for,
        so reports stay byte-reproducible."""
        data = asdict(self)
        if not timing:
            data.pop("planner_mean_time_s")
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "KpiReport":
        return cls(**dict(data))


def build_report(
    logs: Mapping[str, "SimulationLog"], scenario: Scenario, baseline: str = BASELINE
) -> list[KpiReport]:
    if baseline not in logs:
        raise KpiError(f"baseline log {baseline!r} missing")
    base = logs[baseline]
    reports = []
    for controller, log in logs.items():
        report = KpiReport(controller, scenario.id)
        if log.error:
            report.flags["episode"] = log.error
        if base.error and controller != baseline:
            report.flags["baseline"] = base.error

        def record(name, fn, *args):
            try:
                setattr(report, name, float(fn(*args)))
            except (KpiError, ValueError) as exc:
                report.flags[name] = str(exc) or type(exc).__name__

        record("energy_kwh", lambda: total_energy_wh(log) / 1000.0)
        record("energy_savings_pct", energy_savings_pct, log, base)
        record("pe_savings_pct", primary_energy_savings_pct, log, base, scenario.pe_factor)
        record("cost", cost, log, scenario.tariff)
        record("cost_savings_pct", cost_savings_pct, log, base, scenario.tariff)
        record("pct_time_outside_comfort", pct_time_outside_comfort, log)
        record("total_degree_hours", total_degree_hours, log)
        record("peak_power_reduction_pct", peak_power_reduction_pct, log, base, scenario.dr_events)
        if len(log) and not has_occupancy(log):
            report.flags["pct_time_outside_comfort"] = "no-occupancy"
        if log.plans:
            report.planner_mean_time_s = math.fsum(p.wall_time_s for p in log.plans) / len(log.plans)
        report.candidates_evaluated = sum(p.evaluated for p in log.plans)
        report.planning_calls = len(log.plans)
        reports.append(report)
    return reports


def write_reports(reports: Sequence[KpiReport], json_path: str | Path, csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")
    if csv_path is None:
        return
    columns = ["controller", "scenario_id", *REPORT_FIELDS, "historical_data_required", "flags"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in reports:
            row = r.to_dict()
            row["flags"] = ";".join(f"{k}: {v}" for k, v in sorted(r.flags.items()))
            writer.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c]) for c in columns])


def read_reports(path: str | Path) -> list[KpiReport]:
    return [KpiReport.from_dict(d) for d in json.loads(Path(path).read_text())]
