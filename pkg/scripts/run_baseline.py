"""Run the baseline week for the three reference controllers and print their KPIs.

Usage: python scripts/run_baseline.py [--out DIR] [--jobs N] [--substep SECONDS]
"""
from __future__ import annotations

import argparse
import logging
from pathlib import Path

from mpcbench.controllers import ControllerConfig
from mpcbench.coupling import run_matchup
from mpcbench.emulator import ZoneParams
from mpcbench.kpi import build_report, write_reports
from mpcbench.ranking import emit_radar, format_ranking, normalize, rank
from mpcbench.scenarios import baseline_scenario

log = logging.getLogger("run_baseline")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("baseline-out"))
    parser.add_argument("--jobs", type=int, default=3)
    parser.add_argument("--substep", type=float, default=60.0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    scenario = baseline_scenario()
    params = scenario.zone_params(ZoneParams(substep=args.substep))
    controllers = [ControllerConfig("reactive"), ControllerConfig("combinatorial"), ControllerConfig("ga")]
    logs = run_matchup(scenario, controllers, params, jobs=args.jobs)

    args.out.mkdir(parents=True, exist_ok=True)
    for cid, episode in logs.items():
        episode.to_csv(args.out / f"log_{cid}.csv")
    reports = build_report(logs, scenario)
    write_reports(reports, args.out / "reports.json", args.out / "reports.csv")
    scores = normalize(reports)
    emit_radar(scores, args.out / "radar.svg", title=scenario.id)

    header = f"{'controller':<14}{'kWh':>9}{'save %':>9}{'cost':>8}{'out %':>8}{'Kh':>8}{'peak %':>8}"
    print(header)
    for r in reports:
        peak = "n/a" if r.peak_power_reduction_pct is None else f"{r.peak_power_reduction_pct:.1f}"
        print(
            f"{r.controller:<14}{r.energy_kwh:>9.2f}{r.energy_savings_pct:>9.3f}{r.cost:>8.2f}"
            f"{r.pct_time_outside_comfort:>8.1f}{r.total_degree_hours:>8.2f}{peak:>8}"
        )
    print()
    print(format_ranking(rank(scores)))
    log.info("artifacts in %s", args.out)


if __name__ == "__main__":
    main()
