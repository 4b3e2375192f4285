"""Test scenarios: static and dynamic variables, weather, and scenario batteries.

A scenario fixes everything a controller is tested against: the building
knobs applied on top of the base zone parameters, weekly occupancy and gain
profiles, weather, occupant actions, test timing and tariff data.

Weekly profiles hold 168 hourly values indexed by hour of the week (Monday
00:00 first) and repeat, so they cover any test duration.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .controllers import Forecast, ReactiveSchedule, hour_of_week
from .emulator import BoundarySample, ZoneParams

HOURS_PER_WEEK = 168
FACADE_AREA = 12.0  # m2 of external facade; window area = wwr * FACADE_AREA
BASELINE_START = datetime(2023, 1, 9, tzinfo=timezone.utc)  # a Monday in the heating season
SUNRISE, SUNSET = 7.0, 17.0
ORIENTATION_FACTOR = {
    "S": 1.0,
    "SE": 0.85,
    "SW": 0.85,
    "E": 0.6,
    "W": 0.6,
    "NE": 0.35,
    "NW": 0.35,
    "N": 0.2,
}
BUILDING_TYPES = ("office", "residential")
REPLANNING = ("block", "receding")
WEATHER_HEADER = ["timestamp", "t_out_c", "solar_wm2"]


class ScenarioError(ValueError):
    pass


class ScenarioFormatError(ScenarioError):
    pass


class UnknownFieldError(ScenarioError):
    pass


class WeatherFormatError(ValueError):
    pass


class WeatherGapError(WeatherFormatError):
    pass


class TariffGapError(ValueError):
    pass


def format_timestamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


# --- tariffs and period tables --------------------------------------------


@dataclass(frozen=True)
class Period:
    """A value applying from ``start_hour`` (inclusive) to ``end_hour`` (exclusive), UTC.

    ``start_hour > end_hour`` wraps past midnight.
    """

    start_hour: int
    end_hour: int
    value: float

    def covers(self, hour: int) -> bool:
        if self.start_hour <= self.end_hour:
            return self.start_hour <= hour < self.end_hour
        return hour >= self.start_hour or hour < self.end_hour


def period_value(table: Sequence[Period], t: datetime) -> float:
    for period in table:
        if period.covers(t.hour):
            return period.value
    raise TariffGapError(f"no period covers hour {t.hour} ({format_timestamp(t)})")


def flat(value: float) -> tuple[Period, ...]:
    return (Period(0, 24, value),)


# --- weather ---------------------------------------------------------------


@dataclass(frozen=True)
class WeatherSeries:
    start: datetime
    step: float
    t_out: tuple[float, ...]
    solar: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.t_out) != len(self.solar):
            raise WeatherFormatError("t_out and solar must have equal length")
        if self.step <= 0:
            raise WeatherFormatError("step must be > 0")
        if any(s < 0 for s in self.solar):
            raise WeatherFormatError("solar must be >= 0")

    def __len__(self) -> int:
        return len(self.t_out)

    def timestamp(self, i: int) -> datetime:
        return self.start + timedelta(seconds=i * self.step)


@dataclass(frozen=True)
class SynthWeather:
    """Parameters for :func:`synth_weather`; kept on a scenario so batteries can vary them."""

    seed: int = 1
    days: int = 7
    mean: float = 4.0
    daily_amplitude: float = 4.0
    noise_std: float = 1.0
    solar_peak: float = 350.0
    start: datetime = BASELINE_START
    step: float = 3600.0

    def build(self) -> WeatherSeries:
        return synth_weather(
            self.seed, self.days, self.mean, self.daily_amplitude, self.noise_std, self.solar_peak,
            start=self.start, step=self.step,
        )


def synth_weather(
    seed: int,
    days: int,
    mean: float,
    daily_amplitude: float,
    noise_std: float,
    solar_peak: float,
    start: datetime = BASELINE_START,
    step: float = 3600.0,
) -> WeatherSeries:
    """Cosine daily temperature cycle with seeded Gaussian noise and a half-sine solar arc."""
    if days < 1:
        raise ValueError("days must be >= 1")
    n = int(round(days * 86400 / step))
    hours = start.hour + start.minute / 60.0 + np.arange(n) * step / 3600.0
    t_out = mean - daily_amplitude * np.cos(2.0 * np.pi * hours / 24.0)
    if noise_std > 0:
        t_out = t_out + np.random.default_rng(seed).normal(0.0, noise_std, n)
    hour_of_day = np.mod(hours, 24.0)
    arc = np.sin(np.pi * (hour_of_day - SUNRISE) / (SUNSET - SUNRISE))
    solar = solar_peak * np.where((hour_of_day > SUNRISE) & (hour_of_day < SUNSET), np.maximum(arc, 0.0), 0.0)
    return WeatherSeries(start, float(step), tuple(float(x) for x in t_out), tuple(float(x) for x in solar))


def write_weather(series: WeatherSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WEATHER_HEADER)
        for i, (t, s) in enumerate(zip(series.t_out, series.solar)):
            writer.writerow([format_timestamp(series.timestamp(i)), repr(t), repr(s)])


def load_weather(path: str | Path) -> WeatherSeries:
    """Read a weather CSV (``timestamp,t_out_c,solar_wm2``, uniform step, UTC)."""
    times: list[datetime] = []
    t_out: list[float] = []
    solar: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != WEATHER_HEADER:
            raise WeatherFormatError(f"{path}: line 1: expected header {','.join(WEATHER_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise WeatherFormatError(f"{path}: line {line}: expected 3 fields, got {len(row)}")
            try:
                t = parse_timestamp(row[0])
                temp, sun = float(row[1]), float(row[2])
            except ValueError as exc:
                raise WeatherFormatError(f"{path}: line {line}: {exc}") from None
            if not (math.isfinite(temp) and math.isfinite(sun)):
                raise WeatherFormatError(f"{path}: line {line}: non-finite value")
            if sun < 0:
                raise WeatherFormatError(f"{path}: line {line}: negative solar value {sun}")
            if times:
                delta = (t - times[-1]).total_seconds()
                if delta <= 0:
                    raise WeatherGapError(f"{path}: line {line}: timestamp {row[0]} does not advance (row {len(times) + 1})")
                if len(times) > 1 and delta != (times[1] - times[0]).total_seconds():
                    raise WeatherGapError(f"{path}: line {line}: non-uniform step at row {len(times) + 1}")
            times.append(t)
            t_out.append(temp)
            solar.append(sun)
    if not times:
        raise WeatherFormatError(f"{path}: no data rows")
    step = (times[1] - times[0]).total_seconds() if len(times) > 1 else 3600.0
    return WeatherSeries(times[0], step, tuple(t_out), tuple(solar))


# --- scenario types ----------------------------------------------------------


@dataclass(frozen=True)
class StaticVars:
    """Building knobs. Floor position, insulation placement and facade share
    fold into these four scales; the mapping is lossy by design."""

    envelope_scale: float = 1.0  # multiplies r_ie and r_ea
    inertia_scale: float = 1.0  # multiplies c_env
    wwr: float = 0.4
    orientation: str = "S"
    efficiency: float = 1.0
    building_type: str = "office"


@dataclass(frozen=True)
class WindowEvent:
    start: int  # control step
    duration: int  # steps
    extra_conductance: float  # W/K


@dataclass(frozen=True)
class Override:
    start: int
    setpoint: float
    duration: int


@dataclass(frozen=True)
class DrEvent:
    start: int
    duration: int
    power_cap: float  # W of final power

    def steps(self) -> range:
        return range(self.start, self.start + self.duration)


def office_profiles() -> tuple[tuple[int, ...], tuple[float, ...]]:
    occupancy, gains = [], []
    for how in range(HOURS_PER_WEEK):
        day, hour = divmod(how, 24)
        occupied = day < 5 and 8 <= hour < 18
        occupancy.append(4 if occupied else 0)
        gains.append(4 * 80.0 + 400.0 if occupied else 80.0)
    return tuple(occupancy), tuple(gains)


def residential_profiles() -> tuple[tuple[int, ...], tuple[float, ...]]:
    occupancy, gains = [], []
    for how in range(HOURS_PER_WEEK):
        hour = how % 24
        occupied = hour < 8 or hour >= 18
        occupancy.append(2 if occupied else 0)
        gains.append(2 * 80.0 + 150.0 if occupied else 60.0)
    return tuple(occupancy), tuple(gains)


DEFAULT_PROFILES = {"office": office_profiles, "residential": residential_profiles}


@dataclass(frozen=True)
class DynamicVars:
    occupancy_profile: tuple[int, ...]  # weekly headcount
    internal_gain_profile: tuple[float, ...]  # weekly W
    weather: WeatherSeries
    window_opening_events: tuple[WindowEvent, ...] = ()
    blind_schedule: tuple[float, ...] = (1.0,) * HOURS_PER_WEEK  # weekly solar transmission factor
    occupant_setpoint_overrides: tuple[Override, ...] = ()
    disturbance_profile: tuple[float, ...] = ()  # W per control step, hidden from planners
    weather_source: SynthWeather | str | None = None  # how ``weather`` was produced


@dataclass(frozen=True)
class Scenario:
    id: str
    statics: StaticVars
    dynamics: DynamicVars
    comfort_band: tuple[float, float] = (20.0, 24.0)
    comfort_setpoint: float = 21.0
    setback: float = 16.0
    duration: int = 168
    control_step: float = 3600.0
    horizon: int = 6
    replanning: str = "block"
    dr_events: tuple[DrEvent, ...] = ()
    tariff: tuple[Period, ...] = flat(0.20)  # currency per kWh
    pe_factor: float | tuple[Period, ...] = 2.3
    training_period: int | None = None  # steps; unused by perfect-prediction controllers

    @property
    def start(self) -> datetime:
        return self.dynamics.weather.start

    def timestamp(self, i: int) -> datetime:
        return self.start + timedelta(seconds=i * self.control_step)

    def zone_params(self, base: ZoneParams) -> ZoneParams:
        s = self.statics
        return replace(
            base,
            r_ie=base.r_ie * s.envelope_scale,
            r_ea=base.r_ea * s.envelope_scale,
            c_env=base.c_env * s.inertia_scale,
            window_area=s.wwr * FACADE_AREA,
            efficiency=s.efficiency,
        )

    def boundary(self, i: int, hidden: bool = True) -> BoundarySample:
        """Boundary at control step ``i``; ``hidden=False`` drops plant-only channels."""
        d = self.dynamics
        how = hour_of_week(self.timestamp(i))
        solar = d.weather.solar[i] * ORIENTATION_FACTOR[self.statics.orientation] * d.blind_schedule[how]
        disturbance = 0.0
        extra = 0.0
        if hidden:
            if d.disturbance_profile:
                disturbance = d.disturbance_profile[i]
            extra = sum(e.extra_conductance for e in d.window_opening_events if e.start <= i < e.start + e.duration)
        return BoundarySample(
            t_out=d.weather.t_out[i],
            solar=solar,
            internal_gain=d.internal_gain_profile[how],
            occupied=d.occupancy_profile[how] > 0,
            disturbance=disturbance,
            extra_conductance=extra,
        )

    def dr_caps(self) -> list[float | None]:
        caps: list[float | None] = [None] * self.duration
        for event in self.dr_events:
            for i in event.steps():
                if 0 <= i < self.duration:
                    caps[i] = event.power_cap if caps[i] is None else min(caps[i], event.power_cap)
        return caps

    def forecast(self, i: int, horizon: int) -> Forecast:
        caps = self.dr_caps()
        return Forecast(
            boundaries=tuple(self.boundary(j, hidden=False) for j in range(i, i + horizon)),
            band=self.comfort_band,
            dr_caps=tuple(caps[i : i + horizon]),
            start=self.timestamp(i),
            dt=float(self.control_step),
        )

    def override_at(self, i: int) -> float | None:
        for o in self.dynamics.occupant_setpoint_overrides:
            if o.start <= i < o.start + o.duration:
                return o.setpoint
        return None

    def schedule(self) -> ReactiveSchedule:
        return ReactiveSchedule(
            tuple(h > 0 for h in self.dynamics.occupancy_profile), self.comfort_setpoint, self.setback
        )

    def planning_calls(self) -> int:
        if self.replanning == "receding":
            return self.duration
        return math.ceil(self.duration / self.horizon)


def baseline_scenario() -> Scenario:
    occupancy, gains = office_profiles()
    source = SynthWeather(seed=1, days=7)
    return Scenario(
        id="baseline",
        statics=StaticVars(),
        dynamics=DynamicVars(occupancy, gains, source.build(), weather_source=source),
        dr_events=(DrEvent(start=2 * 24 + 8, duration=2, power_cap=1500.0),),
    )


# --- validation ----------------------------------------------------------------


def validate_scenario(s: Scenario, params: ZoneParams | None = None) -> list[str]:
    """Every invariant violation in ``s``, as human-readable diagnostics."""
    out: list[str] = []
    st, dy = s.statics, s.dynamics
    lower, upper = s.comfort_band
    if not lower < upper:
        out.append(f"comfort_band: lower {lower} must be below upper {upper}")
    if s.horizon < 1:
        out.append(f"horizon: must be >= 1, got {s.horizon}")
    if s.duration < 1:
        out.append(f"duration: must be >= 1, got {s.duration}")
    if s.control_step <= 0:
        out.append(f"control_step: must be > 0, got {s.control_step}")
    if s.replanning not in REPLANNING:
        out.append(f"replanning: must be one of {REPLANNING}, got {s.replanning!r}")
    elif s.replanning == "block" and s.horizon >= 1 and s.duration % s.horizon:
        out.append(f"duration: {s.duration} is not a multiple of horizon {s.horizon} in block replanning")
    for name in ("envelope_scale", "inertia_scale", "efficiency"):
        if not getattr(st, name) > 0:
            out.append(f"statics.{name}: must be > 0, got {getattr(st, name)}")
    if not 0.0 <= st.wwr <= 1.0:
        out.append(f"statics.wwr: must lie in [0, 1], got {st.wwr}")
    if st.orientation not in ORIENTATION_FACTOR:
        out.append(f"statics.orientation: unknown {st.orientation!r}")
    if st.building_type not in BUILDING_TYPES:
        out.append(f"statics.building_type: unknown {st.building_type!r}")
    for name in ("occupancy_profile", "internal_gain_profile", "blind_schedule"):
        values = getattr(dy, name)
        if len(values) != HOURS_PER_WEEK:
            out.append(f"dynamics.{name}: needs {HOURS_PER_WEEK} weekly hourly values, got {len(values)}")
    if any(v < 0 for v in dy.occupancy_profile):
        out.append("dynamics.occupancy_profile: headcounts must be >= 0")
    if any(v < 0 for v in dy.internal_gain_profile):
        out.append("dynamics.internal_gain_profile: gains must be >= 0")
    if any(not 0.0 <= v <= 1.0 for v in dy.blind_schedule):
        out.append("dynamics.blind_schedule: attenuation factors must lie in [0, 1]")
    if dy.disturbance_profile and len(dy.disturbance_profile) != s.duration:
        out.append(f"dynamics.disturbance_profile: needs 0 or {s.duration} values, got {len(dy.disturbance_profile)}")
    for e in dy.window_opening_events:
        if e.start < 0 or e.duration < 1 or e.start + e.duration > s.duration or e.extra_conductance < 0:
            out.append(f"dynamics.window_opening_events: invalid event {e}")
    for o in dy.occupant_setpoint_overrides:
        if o.start < 0 or o.duration < 1 or o.start + o.duration > s.duration:
            out.append(f"dynamics.occupant_setpoint_overrides: invalid override {o}")
    w = dy.weather
    if w.step != s.control_step:
        out.append(f"dynamics.weather: step {w.step} s differs from control_step {s.control_step} s")
    if len(w) < s.duration:
        out.append(f"dynamics.weather: {len(w)} samples do not cover duration {s.duration}")
    for e in s.dr_events:
        if e.start < 0 or e.duration < 1 or e.start + e.duration > s.duration or e.power_cap < 0:
            out.append(f"dr_events: invalid event {e}")
    out.extend(_table_gaps("tariff", s.tariff))
    if isinstance(s.pe_factor, tuple):
        out.extend(_table_gaps("pe_factor", s.pe_factor))
        if any(p.value <= 0 for p in s.pe_factor):
            out.append("pe_factor: factors must be > 0")
    elif not s.pe_factor > 0:
        out.append(f"pe_factor: must be > 0, got {s.pe_factor}")
    if s.training_period is not None and s.training_period < 0:
        out.append("training_period: must be >= 0")
    if params is not None and s.control_step > 0:
        try:
            params.substeps(s.control_step)
        except ValueError as exc:
            out.append(f"control_step: {exc}")
    return out


def _table_gaps(name: str, table: Sequence[Period]) -> list[str]:
    missing = [h for h in range(24) if not any(p.covers(h) for p in table)]
    return [f"{name}: no period covers hour(s) {missing}"] if missing else []


# --- JSON schema ------------------------------------------------------------------


def _periods_to_json(table: Sequence[Period]) -> list:
    return [[p.start_hour, p.end_hour, p.value] for p in table]


def _periods_from_json(value: Any, name: str) -> tuple[Period, ...]:
    if isinstance(value, (int, float)):
        return flat(float(value))
    try:
        return tuple(Period(int(a), int(b), float(v)) for a, b, v in value)
    except (TypeError, ValueError):
        raise ScenarioFormatError(f"{name}: expected a number or a list of [start_hour, end_hour, value]") from None


def _weather_to_json(d: DynamicVars) -> dict:
    src = d.weather_source
    if isinstance(src, SynthWeather):
        body = {f.name: getattr(src, f.name) for f in fields(src)}
        body["start"] = format_timestamp(src.start)
        return {"synth": body}
    if isinstance(src, str):
        return {"csv": src}
    w = d.weather
    return {"start": format_timestamp(w.start), "step": w.step, "t_out": list(w.t_out), "solar": list(w.solar)}


def _weather_from_json(value: Any, base_dir: Path) -> tuple[WeatherSeries, SynthWeather | str | None]:
    if not isinstance(value, dict):
        raise ScenarioFormatError("dynamics.weather: expected an object")
    if "synth" in value:
        _reject_unknown(value, {"synth"}, "dynamics.weather")
        body = dict(value["synth"])
        _reject_unknown(body, {f.name for f in fields(SynthWeather)}, "dynamics.weather.synth")
        if "start" in body:
            body["start"] = parse_timestamp(body["start"])
        src = SynthWeather(**body)
        return src.build(), src
    if "csv" in value:
        _reject_unknown(value, {"csv"}, "dynamics.weather")
        path = Path(value["csv"])
        return load_weather(path if path.is_absolute() else base_dir / path), value["csv"]
    _reject_unknown(value, {"start", "step", "t_out", "solar"}, "dynamics.weather")
    series = WeatherSeries(
        parse_timestamp(value["start"]),
        float(value["step"]),
        tuple(float(x) for x in value["t_out"]),
        tuple(float(x) for x in value["solar"]),
    )
    return series, None


def _reject_unknown(data: Mapping, allowed: set[str], where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown key(s) {', '.join(unknown)}")


def scenario_to_dict(s: Scenario) -> dict:
    d = s.dynamics
    return {
        "id": s.id,
        "statics": {f.name: getattr(s.statics, f.name) for f in fields(StaticVars)},
        "dynamics": {
            "occupancy_profile": list(d.occupancy_profile),
            "internal_gain_profile": list(d.internal_gain_profile),
            "window_opening_events": [[e.start, e.duration, e.extra_conductance] for e in d.window_opening_events],
            "blind_schedule": list(d.blind_schedule),
            "occupant_setpoint_overrides": [[o.start, o.setpoint, o.duration] for o in d.occupant_setpoint_overrides],
            "disturbance_profile": list(d.disturbance_profile),
            "weather": _weather_to_json(d),
        },
        "comfort_band": list(s.comfort_band),
        "comfort_setpoint": s.comfort_setpoint,
        "setback": s.setback,
        "duration": s.duration,
        "control_step": s.control_step,
        "horizon": s.horizon,
        "replanning": s.replanning,
        "dr_events": [[e.start, e.duration, e.power_cap] for e in s.dr_events],
        "tariff": _periods_to_json(s.tariff),
        "pe_factor": s.pe_factor if not isinstance(s.pe_factor, tuple) else _periods_to_json(s.pe_factor),
        "training_period": s.training_period,
    }


def scenario_from_dict(data: Mapping, base_dir: str | Path = ".") -> Scenario:
    """Parse the JSON scenario schema; unknown keys are rejected.

    Omitted keys take the baseline defaults; omitted occupancy and gain
    profiles take the defaults of ``statics.building_type``.
    """
    base_dir = Path(base_dir)
    top = {f.name for f in fields(Scenario)}
    _reject_unknown(data, top, "scenario")
    if "id" not in data:
        raise ScenarioFormatError("scenario: missing key 'id'")
    try:
        statics_data = dict(data.get("statics", {}))
        _reject_unknown(statics_data, {f.name for f in fields(StaticVars)}, "statics")
        statics = StaticVars(**statics_data)
        dyn = dict(data.get("dynamics", {}))
        _reject_unknown(dyn, {f.name for f in fields(DynamicVars)} - {"weather_source"}, "dynamics")
        occupancy, gains = DEFAULT_PROFILES.get(statics.building_type, office_profiles)()
        if "weather" in dyn:
            weather, source = _weather_from_json(dyn["weather"], base_dir)
        else:
            source = SynthWeather()
            weather = source.build()
        dynamics = DynamicVars(
            occupancy_profile=tuple(int(x) for x in dyn.get("occupancy_profile", occupancy)),
            internal_gain_profile=tuple(float(x) for x in dyn.get("internal_gain_profile", gains)),
            weather=weather,
            window_opening_events=tuple(
                WindowEvent(int(a), int(b), float(c)) for a, b, c in dyn.get("window_opening_events", [])
            ),
            blind_schedule=tuple(float(x) for x in dyn.get("blind_schedule", [1.0] * HOURS_PER_WEEK)),
            occupant_setpoint_overrides=tuple(
                Override(int(a), float(b), int(c)) for a, b, c in dyn.get("occupant_setpoint_overrides", [])
            ),
            disturbance_profile=tuple(float(x) for x in dyn.get("disturbance_profile", [])),
            weather_source=source,
        )
        kw: dict[str, Any] = {"id": str(data["id"]), "statics": statics, "dynamics": dynamics}
        if "comfort_band" in data:
            lo, hi = data["comfort_band"]
            kw["comfort_band"] = (float(lo), float(hi))
        for name in ("comfort_setpoint", "setback", "control_step"):
            if name in data:
                kw[name] = float(data[name])
        for name in ("duration", "horizon"):
            if name in data:
                kw[name] = int(data[name])
        if "replanning" in data:
            kw["replanning"] = str(data["replanning"])
        if "dr_events" in data:
            kw["dr_events"] = tuple(DrEvent(int(a), int(b), float(c)) for a, b, c in data["dr_events"])
        if "tariff" in data:
            kw["tariff"] = _periods_from_json(data["tariff"], "tariff")
        if "pe_factor" in data:
            pe = data["pe_factor"]
            kw["pe_factor"] = float(pe) if isinstance(pe, (int, float)) else _periods_from_json(pe, "pe_factor")
        if data.get("training_period") is not None:
            kw["training_period"] = int(data["training_period"])
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioFormatError(f"scenario {data.get('id')!r}: {exc}") from None
    return Scenario(**kw)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data, path.parent)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")


# --- batteries ---------------------------------------------------------------------


def _set_field(s: Scenario, path: str, value: Any) -> Scenario:
    head, _, rest = path.partition(".")
    static_names = {f.name for f in fields(StaticVars)}
    if not rest and head in static_names:
        head, rest = "statics", head
    if head == "statics" and rest in static_names:
        return replace(s, statics=replace(s.statics, **{rest: value}))
    if head == "dynamics" and rest in {f.name for f in fields(DynamicVars)} - {"weather", "weather_source"}:
        return replace(s, dynamics=replace(s.dynamics, **{rest: value}))
    if head == "weather" and rest in {f.name for f in fields(SynthWeather)}:
        src = s.dynamics.weather_source
        if not isinstance(src, SynthWeather):
            raise UnknownFieldError(f"{path}: base scenario weather is not synthetic")
        src = replace(src, **{rest: value})
        return replace(s, dynamics=replace(s.dynamics, weather=src.build(), weather_source=src))
    if not rest and head in {f.name for f in fields(Scenario)} - {"id", "statics", "dynamics"}:
        if head == "comfort_band":
            value = tuple(value)
        return replace(s, **{head: value})
    raise UnknownFieldError(f"unknown scenario field {path!r}")


def _get_field(s: Scenario, path: str) -> Any:
    head, _, rest = path.partition(".")
    if not rest and head in {f.name for f in fields(StaticVars)}:
        return getattr(s.statics, head)
    if head == "statics":
        return getattr(s.statics, rest)
    if head == "dynamics":
        return getattr(s.dynamics, rest)
    if head == "weather":
        return getattr(s.dynamics.weather_source, rest)
    return getattr(s, head)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, "g")
    if isinstance(value, (list, tuple)):
        return "-".join(_fmt(v) for v in value)
    return str(value)


def _derive(base: Scenario, assignment: Sequence[tuple[str, Any]]) -> Scenario:
    s = base
    deviations = []
    for path, value in assignment:
        if _normalize(_get_field(base, path)) != _normalize(value):
            deviations.append(f"{path}={_fmt(value)}")
        s = _set_field(s, path, value)
    return replace(s, id="__".join([base.id, *deviations]))


def _normalize(value: Any) -> Any:
    return tuple(value) if isinstance(value, list) else value


def generate_battery(
    base: Scenario,
    variations: Mapping[str, Sequence[Any]],
    mode: str = "cartesian",
) -> list[Scenario]:
    """Expand ``variations`` (field path -> values) around ``base``.

    Field paths are top-level scenario fields (``horizon``), ``statics.<name>``
    or a bare static name, ``dynamics.<name>``, and ``weather.<synth param>``.
    In ``one-at-a-time`` mode values equal to the base value are not
    deviations, so the base appears once.
    """
    for path in variations:
        _check_path(base, path)
    if not variations:
        return [base]
    paths = list(variations)
    if mode == "cartesian":
        return [_derive(base, list(zip(paths, combo))) for combo in itertools.product(*(variations[p] for p in paths))]
    if mode == "one-at-a-time":
        out = [base]
        for path in paths:
            current = _normalize(_get_field(base, path))
            for value in variations[path]:
                if _normalize(value) != current:
                    out.append(_derive(base, [(path, value)]))
        return out
    raise ValueError(f"unknown battery mode {mode!r}; expected 'cartesian' or 'one-at-a-time'")


def _check_path(s: Scenario, path: str) -> None:
    try:
        current = _get_field(s, path)
    except AttributeError:
        raise UnknownFieldError(f"unknown scenario field {path!r}") from None
    _set_field(s, path, current)


def load_battery(path: str | Path) -> list[Scenario]:
    """Read a battery file: ``{"base": "baseline" | path | {...}, "mode": ..., "variations": {...}}``."""
    path = Path(path)
    data = json.loads(path.read_text())
    _reject_unknown(data, {"base", "mode", "variations"}, "battery")
    base_spec = data.get("base", "baseline")
    if base_spec == "baseline":
        base = baseline_scenario()
    elif isinstance(base_spec, str):
        p = Path(base_spec)
        base = load_scenario(p if p.is_absolute() else path.parent / p)
    else:
        base = scenario_from_dict(base_spec, path.parent)
    return generate_battery(base, data.get("variations", {}), data.get("mode", "cartesian"))
