from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcbench.emulator import ZoneParams
from mpcbench.scenarios import (
    Period,
    ScenarioFormatError,
    SynthWeather,
    TariffGapError,
    UnknownFieldError,
    WeatherFormatError,
    WeatherGapError,
    baseline_scenario,
    flat,
    format_timestamp,
    generate_battery,
    load_battery,
    load_scenario,
    load_weather,
    parse_timestamp,
    period_value,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    synth_weather,
    validate_scenario,
    write_weather,
)


def test_baseline_timing():
    s = baseline_scenario()
    assert (s.duration, s.horizon, s.control_step, s.replanning) == (168, 6, 3600.0, "block")
    assert s.planning_calls() == 28
    assert replace(s, replanning="receding").planning_calls() == 168
    assert s.start.weekday() == 0
    assert validate_scenario(s, ZoneParams()) == []


def test_baseline_occupancy_is_office_hours():
    s = baseline_scenario()
    occupied = [s.boundary(i).occupied for i in range(24)]
    assert occupied == [8 <= h < 18 for h in range(24)]
    assert not any(s.boundary(i).occupied for i in range(5 * 24, 7 * 24))


def test_synth_weather_extremes():
    w = synth_weather(seed=0, days=1, mean=5.0, daily_amplitude=5.0, noise_std=0.0, solar_peak=300.0)
    assert w.t_out[0] == pytest.approx(0.0, abs=1e-12)
    assert w.t_out[12] == pytest.approx(10.0, abs=1e-12)
    assert min(w.t_out) == w.t_out[0] and max(w.t_out) == w.t_out[12]
    assert all(x == 0.0 for x in w.solar[:7]) and max(w.solar) > 0


def test_synth_weather_determinism_and_length():
    a = SynthWeather(seed=4, days=7).build()
    assert a == SynthWeather(seed=4, days=7).build()
    assert len(a) == 168
    assert a != SynthWeather(seed=5, days=7).build()


@given(st.integers(0, 2**32), st.integers(1, 3), st.floats(-10, 10), st.floats(0, 8), st.floats(0, 3))
def test_weather_round_trip(tmp_path_factory, seed, days, mean, amp, noise):
    path = tmp_path_factory.mktemp("w") / "weather.csv"
    series = synth_weather(seed, days, mean, amp, noise, 400.0)
    write_weather(series, path)
    assert load_weather(path) == series


def _write_rows(path, rows):
    path.write_text("timestamp,t_out_c,solar_wm2\n" + "".join(f"{t},{a},{b}\n" for t, a, b in rows))


def test_load_weather_168_rows(tmp_path):
    write_weather(SynthWeather().build(), tmp_path / "w.csv")
    assert len(load_weather(tmp_path / "w.csv")) == 168


def test_load_weather_duplicate_timestamp(tmp_path):
    rows = [("2023-01-09T00:00:00Z", 1.0, 0.0), ("2023-01-09T01:00:00Z", 1.0, 0.0), ("2023-01-09T01:00:00Z", 2.0, 0.0)]
    _write_rows(tmp_path / "w.csv", rows)
    with pytest.raises(WeatherGapError, match="line 4"):
        load_weather(tmp_path / "w.csv")


def test_load_weather_non_uniform_step(tmp_path):
    rows = [("2023-01-09T00:00:00Z", 1.0, 0.0), ("2023-01-09T01:00:00Z", 1.0, 0.0), ("2023-01-09T03:00:00Z", 2.0, 0.0)]
    _write_rows(tmp_path / "w.csv", rows)
    with pytest.raises(WeatherGapError):
        load_weather(tmp_path / "w.csv")


def test_load_weather_negative_solar(tmp_path):
    _write_rows(tmp_path / "w.csv", [("2023-01-09T00:00:00Z", 1.0, -3.0)])
    with pytest.raises(WeatherFormatError, match="negative solar"):
        load_weather(tmp_path / "w.csv")


def test_load_weather_bad_header(tmp_path):
    (tmp_path / "w.csv").write_text("time,temp\n")
    with pytest.raises(WeatherFormatError, match="line 1"):
        load_weather(tmp_path / "w.csv")


def test_timestamps_round_trip():
    t = parse_timestamp("2023-01-09T05:00:00Z")
    assert format_timestamp(t) == "2023-01-09T05:00:00Z"


# --- tariffs -------------------------------------------------------------------------


def test_period_lookup_wraps_midnight():
    table = (Period(7, 22, 0.4), Period(22, 7, 0.1))
    s = baseline_scenario()
    assert period_value(table, s.timestamp(8)) == 0.4
    assert period_value(table, s.timestamp(23)) == 0.1
    assert period_value(table, s.timestamp(3)) == 0.1
    assert period_value(flat(0.2), s.timestamp(3)) == 0.2
    with pytest.raises(TariffGapError):
        period_value((Period(7, 22, 0.4),), s.timestamp(3))


# --- batteries -----------------------------------------------------------------------

VARIATIONS = {"envelope_scale": [1.0, 0.7], "weather.seed": [1, 2, 3]}


def test_battery_cartesian_2x3():
    battery = generate_battery(baseline_scenario(), VARIATIONS, "cartesian")
    assert len(battery) == 6
    assert len({s.id for s in battery}) == 6


def test_battery_one_at_a_time():
    battery = generate_battery(baseline_scenario(), VARIATIONS, "one-at-a-time")
    assert len(battery) == 4
    assert battery[0].id == "baseline"


def test_battery_empty_variations():
    base = baseline_scenario()
    assert generate_battery(base, {}) == [base]


def test_battery_determinism_and_closure():
    a = generate_battery(baseline_scenario(), VARIATIONS)
    b = generate_battery(baseline_scenario(), VARIATIONS)
    assert [s.id for s in a] == [s.id for s in b]
    assert a == b
    for s in a:
        assert validate_scenario(s, ZoneParams()) == []


def test_battery_varies_the_weather():
    battery = generate_battery(baseline_scenario(), {"weather.seed": [1, 2]})
    assert battery[0].dynamics.weather != battery[1].dynamics.weather


def test_battery_unknown_field():
    with pytest.raises(UnknownFieldError):
        generate_battery(baseline_scenario(), {"floor_position": [1, 2]})
    with pytest.raises(ValueError):
        generate_battery(baseline_scenario(), VARIATIONS, "latin-hypercube")


def test_load_battery_file(tmp_path):
    (tmp_path / "b.json").write_text(json.dumps({"base": "baseline", "mode": "cartesian", "variations": VARIATIONS}))
    assert [s.id for s in load_battery(tmp_path / "b.json")] == [
        s.id for s in generate_battery(baseline_scenario(), VARIATIONS)
    ]


# --- validation and JSON ------------------------------------------------------------


def test_validate_band_ordering():
    problems = validate_scenario(replace(baseline_scenario(), comfort_band=(24.0, 20.0)))
    assert any(p.startswith("comfort_band") for p in problems)


def test_validate_block_divisibility():
    problems = validate_scenario(replace(baseline_scenario(), horizon=5))
    assert any("multiple of horizon 5" in p for p in problems)
    assert validate_scenario(replace(baseline_scenario(), horizon=5, replanning="receding")) == []


def test_validate_reports_every_violation():
    s = replace(baseline_scenario(), comfort_band=(24.0, 20.0), horizon=5, pe_factor=-1.0, tariff=(Period(0, 12, 0.2),))
    problems = validate_scenario(s)
    assert len(problems) == 4


def test_validate_weather_coverage():
    s = replace(baseline_scenario(), duration=200, horizon=8)
    assert any("do not cover" in p for p in validate_scenario(s))


def test_scenario_json_round_trip(tmp_path):
    s = baseline_scenario()
    save_scenario(s, tmp_path / "s.json")
    assert load_scenario(tmp_path / "s.json") == s


def test_scenario_json_csv_weather(tmp_path):
    write_weather(SynthWeather(seed=9).build(), tmp_path / "w.csv")
    s = scenario_from_dict({"id": "csv", "dynamics": {"weather": {"csv": "w.csv"}}}, tmp_path)
    assert s.dynamics.weather == SynthWeather(seed=9).build()
    assert scenario_from_dict(scenario_to_dict(s), tmp_path) == s


def test_scenario_json_rejects_unknown_keys():
    with pytest.raises(ScenarioFormatError, match="colour"):
        scenario_from_dict({"id": "x", "colour": "red"})
    with pytest.raises(ScenarioFormatError, match="statics"):
        scenario_from_dict({"id": "x", "statics": {"floors": 3}})
    with pytest.raises(ScenarioFormatError):
        scenario_from_dict({"horizon": 6})


def test_hidden_channels_stay_out_of_forecasts():
    s = baseline_scenario()
    s = replace(s, dynamics=replace(s.dynamics, disturbance_profile=tuple(np.full(168, 250.0))))
    assert s.boundary(3).disturbance == 250.0
    assert all(b.disturbance == 0.0 for b in s.forecast(0, 6).boundaries)


def test_statics_map_onto_zone_params():
    s = replace(baseline_scenario(), statics=replace(baseline_scenario().statics, envelope_scale=2.0, wwr=0.5))
    p = s.zone_params(ZoneParams())
    assert p.r_ie == 2 * ZoneParams().r_ie and p.r_ea == 2 * ZoneParams().r_ea
    assert p.window_area == 6.0
