"""0-10 KPI normalization, unweighted ranking and radar-chart SVG output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .kpi import KpiReport

HIGHER = "higher_is_better"
LOWER = "lower_is_better"

DEFAULT_ORIENTATION: dict[str, str] = {
    "energy_savings_pct": HIGHER,
    "pe_savings_pct": HIGHER,
    "cost_savings_pct": HIGHER,
    "peak_power_reduction_pct": HIGHER,
    "pct_time_outside_comfort": LOWER,
    "total_degree_hours": LOWER,
    "cost": LOWER,
    "energy_kwh": LOWER,
    "planner_mean_time_s": LOWER,
    "candidates_evaluated": LOWER,
}
# Wall-clock time is left off the default radar: it is not reproducible run to run.
RADAR_KPIS = (
    "energy_savings_pct",
    "pe_savings_pct",
    "cost_savings_pct",
    "pct_time_outside_comfort",
    "total_degree_hours",
    "peak_power_reduction_pct",
)
ANCHOR_TOL = 1e-9


class RadarError(ValueError):
    pass


@dataclass
class RadarScores:
    controllers: list[str]
    kpis: list[str]
    scores: dict[str, dict[str, float]]
    raw: dict[str, dict[str, float | None]]
    best: dict[str, float | None]
    orientation: dict[str, str]
    flags: dict[str, list[str]] = field(default_factory=dict)  # kpi -> controllers with undefined values
    scenario_id: str = ""
    manifest_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "manifest_hash": self.manifest_hash,
            "controllers": self.controllers,
            "kpis": self.kpis,
            "orientation": dict(self.orientation),
            "scores": self.scores,
            "raw": self.raw,
            "best": self.best,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RadarScores":
        return cls(
            controllers=list(data["controllers"]),
            kpis=list(data["kpis"]),
            scores={c: dict(v) for c, v in data["scores"].items()},
            raw={c: dict(v) for c, v in data["raw"].items()},
            best=dict(data["best"]),
            orientation=dict(data["orientation"]),
            flags={k: list(v) for k, v in data.get("flags", {}).items()},
            scenario_id=data.get("scenario_id", ""),
            manifest_hash=data.get("manifest_hash", ""),
        )


def _score_higher(v: float, best: float) -> float:
    if best > 0:
        return 10.0 * (max(v, 0.0) / best)
    return 10.0 if v == best else 0.0


def _score_lower(v: float, best: float) -> float:
    if best > 0:
        return 10.0 * (best / v)
    return 10.0 if v == best else 0.0


def normalize_values(values: Mapping[str, float | None], direction: str) -> tuple[dict[str, float], float | None, list[str]]:
    """Score one KPI across controllers; returns (scores, best raw value, undefined ids).

    The best controller scores exactly 10. Undefined values (None, NaN, or a
    negative lower-is-better value) score 0 and are reported.
    """
    if direction not in (HIGHER, LOWER):
        raise ValueError(f"unknown orientation {direction!r}")
    undefined = []
    defined: dict[str, float] = {}
    for c, v in values.items():
        if v is None or not math.isfinite(v) or (direction == LOWER and v < 0):
            undefined.append(c)
        else:
            defined[c] = float(v)
    scores = {c: 0.0 for c in values}
    if not defined:
        return scores, None, undefined
    best = max(defined.values()) if direction == HIGHER else min(defined.values())
    fn = _score_higher if direction == HIGHER else _score_lower
    for c, v in defined.items():
        scores[c] = min(max(fn(v, best), 0.0), 10.0)
    return scores, best, undefined


def normalize(
    reports: Sequence[KpiReport],
    orientation: Mapping[str, str] | None = None,
    kpis: Sequence[str] = RADAR_KPIS,
) -> RadarScores:
    if not reports:
        raise ValueError("at least one report is required")
    orientation = dict(DEFAULT_ORIENTATION if orientation is None else orientation)
    missing = [k for k in kpis if k not in orientation]
    if missing:
        raise ValueError(f"no orientation declared for {missing}")
    controllers = [r.controller for r in reports]
    raw: dict[str, dict[str, float | None]] = {c: {} for c in controllers}
    scores: dict[str, dict[str, float]] = {c: {} for c in controllers}
    best: dict[str, float | None] = {}
    flags: dict[str, list[str]] = {}
    for k in kpis:
        values = {r.controller: getattr(r, k) for r in reports}
        kpi_scores, best[k], undefined = normalize_values(values, orientation[k])
        for c in controllers:
            raw[c][k] = values[c]
            scores[c][k] = kpi_scores[c]
        if undefined:
            flags[k] = undefined
    scenario_ids = sorted({r.scenario_id for r in reports})
    used = {k: orientation[k] for k in kpis}
    return RadarScores(controllers, list(kpis), scores, raw, best, used, flags, ",".join(scenario_ids))


@dataclass(frozen=True)
class RankEntry:
    position: int
    controller: str
    mean_score: float
    tied: bool


def rank_means(means: Mapping[str, float]) -> list[RankEntry]:
    order = sorted(means, key=lambda c: (-means[c], c))
    counts: dict[float, int] = {}
    for c in order:
        counts[means[c]] = counts.get(means[c], 0) + 1
    return [RankEntry(i + 1, c, means[c], counts[means[c]] > 1) for i, c in enumerate(order)]


def rank(scores: RadarScores) -> list[RankEntry]:
    """Unweighted mean score per controller, best first; ties ordered by id and flagged."""
    if not scores.controllers:
        raise ValueError("no controllers to rank")
    means = {c: math.fsum(scores.scores[c][k] for k in scores.kpis) / len(scores.kpis) for c in scores.controllers}
    return rank_means(means)


def format_ranking(entries: Sequence[RankEntry]) -> str:
    width = max([len("controller"), *(len(e.controller) for e in entries)])
    lines = [f"{'rank':>4}  {'controller':<{width}}  {'mean':>6}  tie"]
    for e in entries:
        lines.append(f"{e.position:>4}  {e.controller:<{width}}  {e.mean_score:6.3f}  {'yes' if e.tied else ''}")
    return "\n".join(lines)


def write_scores(scores: RadarScores, json_path: str | Path, csv_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(scores.to_dict(), indent=2, sort_keys=True) + "\n")
    if csv_path is None:
        return
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario_id", "manifest_hash", "controller", *scores.kpis, "mean", "rank"])
        for e in rank(scores):
            writer.writerow(
                [scores.scenario_id, scores.manifest_hash, e.controller]
                + [repr(scores.scores[e.controller][k]) for k in scores.kpis]
                + [repr(e.mean_score), e.position]
            )


# --- SVG -----------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
SIZE = 640
CENTER = 300.0
RADIUS = 200.0


def _point(axis: int, n_axes: int, score: float) -> tuple[float, float]:
    angle = -math.pi / 2 + 2 * math.pi * axis / n_axes
    r = RADIUS * score / 10.0
    return CENTER + r * math.cos(angle), CENTER + r * math.sin(angle)


def _fmt(x: float) -> str:
    text = f"{x:.3f}"
    return "0.000" if text == "-0.000" else text


def render_radar(scores: RadarScores, title: str | None = None) -> str:
    n = len(scores.kpis)
    if n < 3:
        raise RadarError(f"a radar chart needs at least 3 KPIs, got {n}")
    title = title if title is not None else f"KPI scores - {scores.scenario_id}"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>{escape(title)}</title>",
        f'<desc>scenario={escape(scores.scenario_id)} manifest={escape(scores.manifest_hash)}</desc>',
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        '<g id="grid" fill="none" stroke="#cccccc" stroke-width="1">',
    ]
    for ring in (2, 4, 6, 8, 10):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (_point(i, n, ring) for i in range(n)))
        out.append(f'<polygon class="ring" points="{pts}"/>')
    out.append("</g>")
    out.append('<g id="axes" stroke="#888888" stroke-width="1">')
    for i, kpi in enumerate(scores.kpis):
        x, y = _point(i, n, 10.0)
        out.append(f'<line class="axis" x1="{_fmt(CENTER)}" y1="{_fmt(CENTER)}" x2="{_fmt(x)}" y2="{_fmt(y)}"/>')
    out.append("</g>")
    out.append('<g id="labels" font-family="sans-serif" font-size="12" fill="#222222">')
    for i, kpi in enumerate(scores.kpis):
        x, y = _point(i, n, 11.2)
        anchor = "middle" if abs(x - CENTER) < 1 else ("start" if x > CENTER else "end")
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}">{escape(kpi)}</text>')
    out.append("</g>")
    out.append('<g id="series">')
    for j, c in enumerate(scores.controllers):
        color = PALETTE[j % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(x)},{_fmt(y)}" for x, y in (_point(i, n, scores.scores[c][k]) for i, k in enumerate(scores.kpis))
        )
        out.append(
            f'<polygon class="controller" data-controller="{escape(c)}" points="{pts}" '
            f'fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"/>'
        )
    out.append("</g>")
    out.append('<g id="legend" font-family="sans-serif" font-size="13">')
    for j, c in enumerate(scores.controllers):
        color = PALETTE[j % len(PALETTE)]
        y = 20 + 20 * j
        out.append(f'<rect x="{SIZE - 170}" y="{y}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{SIZE - 152}" y="{y + 11}">{escape(c)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_radar(scores: RadarScores, path: str | Path, title: str | None = None) -> Path:
    path = Path(path)
    path.write_text(render_radar(scores, title))
    return path
