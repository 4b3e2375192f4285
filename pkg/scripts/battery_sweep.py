"""Sweep envelope quality and weather seeds around the baseline and tabulate MPC savings.

Each derived scenario runs the reactive, combinatorial and GA controllers.
Usage: python scripts/battery_sweep.py [--days D] [--jobs N] [--substep SECONDS]
"""
from __future__ import annotations

import argparse
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from mpcbench.controllers import ControllerConfig
from mpcbench.coupling import run_episode
from mpcbench.emulator import ZoneParams
from mpcbench.kpi import build_report
from mpcbench.ranking import format_ranking, normalize, rank, rank_means
from mpcbench.scenarios import baseline_scenario, generate_battery

log = logging.getLogger("battery_sweep")

CONTROLLERS = (ControllerConfig("reactive"), ControllerConfig("combinatorial"), ControllerConfig("ga"))


def _episode(task):
    return run_episode(*task)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--days", type=int, default=2)
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--substep", type=float, default=300.0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    base = baseline_scenario()
    base = replace(base, duration=24 * args.days, dr_events=tuple(e for e in base.dr_events if e.start < 24 * args.days))
    battery = generate_battery(base, {"envelope_scale": [1.0, 0.7, 1.3], "weather.seed": [1, 2]})
    params = ZoneParams(substep=args.substep)
    tasks = [(s, c, s.zone_params(params)) for s in battery for c in CONTROLLERS]
    log.info("%d scenarios x %d controllers", len(battery), len(CONTROLLERS))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        episodes = list(pool.map(_episode, tasks))

    all_reports = []
    print(f"{'scenario':<48}{'comb %':>9}{'ga %':>9}{'react out %':>13}{'comb out %':>12}")
    for k, scenario in enumerate(battery):
        logs = {c.id: episodes[k * len(CONTROLLERS) + j] for j, c in enumerate(CONTROLLERS)}
        reports = {r.controller: r for r in build_report(logs, scenario)}
        all_reports.append(list(reports.values()))
        print(
            f"{scenario.id:<48}{reports['combinatorial'].energy_savings_pct:>9.3f}"
            f"{reports['ga'].energy_savings_pct:>9.3f}{reports['reactive'].pct_time_outside_comfort:>13.1f}"
            f"{reports['combinatorial'].pct_time_outside_comfort:>12.1f}"
        )

    # unweighted mean of per-scenario normalized scores
    per_set = [rank(normalize(reports)) for reports in all_reports]
    controllers = [c.id for c in CONTROLLERS]
    means = {c: float(np.mean([e.mean_score for entries in per_set for e in entries if e.controller == c])) for c in controllers}
    print()
    print(format_ranking(rank_means(means)))


if __name__ == "__main__":
    main()
