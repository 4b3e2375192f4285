"""Command-line entry point: ``run``, ``rank``, ``validate`` and ``weather-synth``.

``run`` dispatches every scenario x controller episode to a bounded worker
pool and writes all artifacts from the parent process, so file contents do
not depend on the number of workers.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .controllers import CONTROLLER_KINDS, ControllerConfig, with_seed
from .coupling import SimulationLog, run_episode
from .emulator import ZoneParams
from .kpi import KpiReport, build_report, read_reports, write_reports
from .ranking import RADAR_KPIS, emit_radar, format_ranking, normalize, rank, rank_means, write_scores
from .scenarios import (
    REPLANNING,
    Scenario,
    ScenarioError,
    SynthWeather,
    WeatherFormatError,
    baseline_scenario,
    load_battery,
    load_scenario,
    parse_timestamp,
    scenario_to_dict,
    validate_scenario,
    write_weather,
)

log = logging.getLogger("mpcbench")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid run configuration, detected before any simulation starts."""


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple[Scenario, ...]
    controllers: tuple[ControllerConfig, ...]
    params: ZoneParams
    out: Path
    jobs: int = 1
    seed: int = 0


# --- configuration -------------------------------------------------------------


def parse_controllers(text: str | None, config_path: str | None) -> list[ControllerConfig]:
    """Controllers from ``--config`` (JSON with a ``controllers`` list) or a comma list of kinds."""
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read controller config {config_path}: {exc}") from None
        entries = data.get("controllers") if isinstance(data, dict) else data
        if not isinstance(entries, list):
            raise ConfigError("controller config must be a list or an object with a 'controllers' list")
        try:
            controllers = [ControllerConfig.from_dict(e if isinstance(e, dict) else {"kind": e}) for e in entries]
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"controller config: {exc}") from None
    else:
        kinds = [k.strip() for k in (text or "reactive,combinatorial,ga").split(",") if k.strip()]
        unknown = [k for k in kinds if k not in CONTROLLER_KINDS]
        if unknown:
            raise ConfigError(f"unknown controller(s) {unknown}; expected one of {list(CONTROLLER_KINDS)}")
        controllers = [ControllerConfig(k) for k in kinds]
    ids = [c.id for c in controllers]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"controller ids must be unique, got {ids}")
    if not any(c.kind == "reactive" for c in controllers):
        raise ConfigError("the controller list must include the reactive baseline")
    return controllers


def load_params(path: str | None) -> ZoneParams:
    if path is None:
        return ZoneParams()
    try:
        return ZoneParams.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"zone parameters {path}: {exc}") from None


def load_scenarios(args: argparse.Namespace) -> list[Scenario]:
    try:
        if args.battery:
            scenarios = load_battery(args.battery)
        elif args.scenario:
            scenarios = [load_scenario(args.scenario)]
        else:
            scenarios = [baseline_scenario()]
    except (OSError, json.JSONDecodeError, ScenarioError, WeatherFormatError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if args.replanning:
        scenarios = [replace(s, replanning=args.replanning) for s in scenarios]
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"scenario ids must be unique, got {ids}")
    return scenarios


def build_config(args: argparse.Namespace) -> RunConfig:
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    controllers = [with_seed(c, args.seed) for c in parse_controllers(args.controllers, args.config)]
    params = load_params(args.zone)
    scenarios = load_scenarios(args)
    problems = [f"{s.id}: {d}" for s in scenarios for d in validate_scenario(s, params)]
    if problems:
        raise ConfigError("invalid scenario(s):\n  " + "\n  ".join(problems))
    out = Path(args.out or os.environ.get("MPCBENCH_OUT") or "mpcbench-out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    return RunConfig(tuple(scenarios), tuple(controllers), params, out, args.jobs, args.seed)


def manifest(config: RunConfig) -> dict:
    """Everything that determines the artifacts; worker count and paths are excluded."""
    return {
        "version": __version__,
        "seed": config.seed,
        "zone": config.params.to_dict(),
        "controllers": [c.to_dict() for c in config.controllers],
        "scenarios": [scenario_to_dict(s) for s in config.scenarios],
    }


def manifest_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# --- run -----------------------------------------------------------------------


def _episode(task: tuple[Scenario, ControllerConfig, ZoneParams]) -> SimulationLog:
    return run_episode(*task)


def execute(config: RunConfig) -> list[str]:
    """Run all episodes and write artifacts; returns one line per failure."""
    tasks = [(s, c, config.params) for s in config.scenarios for c in config.controllers]
    log.info("running %d episode(s) on %d worker(s)", len(tasks), config.jobs)
    if config.jobs == 1 or len(tasks) == 1:
        logs = [_episode(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(tasks))) as pool:
            logs = list(pool.map(_episode, tasks))

    man = manifest(config)
    digest = manifest_hash(man)
    (config.out / "manifest.json").write_text(
        json.dumps({**man, "manifest_hash": digest}, indent=2, sort_keys=True) + "\n"
    )
    baseline_id = next(c.id for c in config.controllers if c.kind == "reactive")
    failures: list[str] = []
    it = iter(logs)
    for scenario in config.scenarios:
        episode_logs = {c.id: next(it) for c in config.controllers}
        folder = config.out / scenario.id
        folder.mkdir(parents=True, exist_ok=True)
        for cid, episode in episode_logs.items():
            episode.to_csv(folder / f"log_{cid}.csv")
            episode.plans_to_csv(folder / f"plans_{cid}.csv")
            if episode.error:
                failures.append(f"{scenario.id}/{cid}: {episode.error}")
        reports = build_report(episode_logs, scenario, baseline=baseline_id)
        write_reports(reports, folder / "reports.json", folder / "reports.csv")
        timing = {r.controller: r.planner_mean_time_s for r in reports}
        (folder / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
        scores = normalize(reports)
        scores.manifest_hash = digest
        write_scores(scores, folder / "scores.json", folder / "scores.csv")
        emit_radar(scores, folder / "radar.svg")
        print(f"== {scenario.id}")
        print(format_ranking(rank(scores)))
    return failures


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failures = execute(config)
    if failures:
        print(f"{len(failures)} episode(s) failed:", file=sys.stderr)
        for line in failures:
            print(f"  {line}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"artifacts written to {config.out}")
    return EXIT_OK


# --- rank ----------------------------------------------------------------------


class SchemaMismatchError(ValueError):
    pass


def _report_path(path: str) -> Path:
    p = Path(path)
    return p / "reports.json" if p.is_dir() else p


def aggregate(report_sets: Sequence[Sequence[KpiReport]], kpis: Sequence[str] = RADAR_KPIS) -> dict[str, dict[str, float]]:
    """Per-KPI mean of normalized scores over report sets, per controller."""
    if not report_sets:
        raise ValueError("at least one report set is required")
    controllers = sorted(r.controller for r in report_sets[0])
    for i, reports in enumerate(report_sets):
        found = sorted(r.controller for r in reports)
        if found != controllers:
            raise SchemaMismatchError(f"report set {i} has controllers {found}, expected {controllers}")
    per_set = [normalize(list(reports), kpis=kpis) for reports in report_sets]
    return {
        c: {k: math.fsum(s.scores[c][k] for s in per_set) / len(per_set) for k in kpis}
        for c in controllers
    }


def cmd_rank(args: argparse.Namespace) -> int:
    report_sets = []
    for path in args.reports:
        try:
            report_sets.append(read_reports(_report_path(path)))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        except TypeError as exc:
            print(f"error: {path} is not a report set: {exc}", file=sys.stderr)
            return EXIT_FAILURE
    try:
        means = aggregate(report_sets)
    except SchemaMismatchError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    entries = rank_means({c: math.fsum(v.values()) / len(v) for c, v in means.items()})
    print(format_ranking(entries))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ranking.json").write_text(json.dumps({
            "sources": [str(_report_path(p)) for p in args.reports],
            "kpi_means": means,
            "ranking": [vars(e) for e in entries],
        }, indent=2, sort_keys=True) + "\n")
        with open(out / "ranking.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "controller", *RADAR_KPIS, "mean", "tied"])
            for e in entries:
                writer.writerow([e.position, e.controller, *(repr(means[e.controller][k]) for k in RADAR_KPIS),
                                 repr(e.mean_score), e.tied])
    return EXIT_OK


# --- validate and weather ---------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario_file)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ScenarioError, WeatherFormatError, ValueError) as exc:
        print(f"{args.scenario_file}: {exc}")
        return EXIT_FAILURE
    try:
        params = load_params(args.zone)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    problems = validate_scenario(scenario, params)
    for p in problems:
        print(f"{args.scenario_file}: {p}")
    if not problems:
        print(f"{args.scenario_file}: ok")
    return EXIT_FAILURE if problems else EXIT_OK


def cmd_weather_synth(args: argparse.Namespace) -> int:
    kw = {}
    if args.start:
        kw["start"] = parse_timestamp(args.start)
    source = SynthWeather(
        seed=args.seed, days=args.days, mean=args.mean, daily_amplitude=args.amplitude,
        noise_std=args.noise, solar_peak=args.solar_peak, step=args.step, **kw,
    )
    write_weather(source.build(), args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpcbench", description="Benchmark building controllers on an RC zone emulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a controller matchup and emit all artifacts")
    source = run.add_mutually_exclusive_group()
    source.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
    source.add_argument("--baseline", action="store_true", help="built-in baseline scenario (default)")
    source.add_argument("--battery", metavar="PATH", help="battery spec JSON file")
    run.add_argument("--controllers", metavar="LIST", help="comma-separated kinds (default reactive,combinatorial,ga)")
    run.add_argument("--config", metavar="PATH", help="JSON controller list with hyperparameters")
    run.add_argument("--zone", metavar="PATH", help="zone parameter JSON (default: built-in)")
    run.add_argument("--out", metavar="DIR", help="output directory (default $MPCBENCH_OUT or ./mpcbench-out)")
    run.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    run.add_argument("--seed", type=int, default=0, metavar="U64", help="global seed for stochastic planners")
    run.add_argument("--replanning", choices=REPLANNING, help="override the scenario replanning mode")
    run.set_defaults(func=cmd_run)

    rk = sub.add_parser("rank", help="aggregate report sets and rank controllers")
    rk.add_argument("reports", nargs="+", metavar="REPORTS", help="reports.json files or run scenario folders")
    rk.add_argument("--out", metavar="DIR", help="also write ranking.json and ranking.csv here")
    rk.set_defaults(func=cmd_rank)

    val = sub.add_parser("validate", help="list every invariant violation of a scenario file")
    val.add_argument("scenario_file", metavar="SCENARIO")
    val.add_argument("--zone", metavar="PATH", help="zone parameter JSON used for step checks")
    val.set_defaults(func=cmd_validate)

    ws = sub.add_parser("weather-synth", help="write a synthetic weather CSV")
    ws.add_argument("output", metavar="CSV")
    ws.add_argument("--seed", type=int, default=1)
    ws.add_argument("--days", type=int, default=7)
    ws.add_argument("--mean", type=float, default=4.0, help="mean outdoor temperature (degC)")
    ws.add_argument("--amplitude", type=float, default=4.0, help="daily half-swing (K)")
    ws.add_argument("--noise", type=float, default=1.0, help="noise standard deviation (K)")
    ws.add_argument("--solar-peak", type=float, default=350.0, help="W/m2")
    ws.add_argument("--step", type=float, default=3600.0, help="seconds")
    ws.add_argument("--start", help="UTC start, e.g. 2023-01-09T00:00:00Z")
    ws.set_defaults(func=cmd_weather_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
