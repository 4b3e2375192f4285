from __future__ import annotations

import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpcbench.kpi import KpiReport
from mpcbench.ranking import (
    ANCHOR_TOL,
    HIGHER,
    LOWER,
    RADAR_KPIS,
    RadarError,
    RadarScores,
    emit_radar,
    normalize,
    normalize_values,
    rank,
    render_radar,
)


def report(name, **values):
    return KpiReport(controller=name, scenario_id="s", **values)


def test_higher_is_better_ratio():
    scores, best, undefined = normalize_values({"a": 30.0, "b": 15.0, "c": 10.0}, HIGHER)
    assert best == 30.0 and undefined == []
    assert scores["a"] == 10.0 and scores["b"] == 5.0
    assert scores["c"] == pytest.approx(10 / 3, abs=1e-12)


def test_lower_is_better_inverse_ratio():
    scores, _, _ = normalize_values({"a": 2.0, "b": 4.0}, LOWER)
    assert scores == {"a": 10.0, "b": 5.0}


def test_ties_all_score_ten():
    for direction in (HIGHER, LOWER):
        scores, _, _ = normalize_values({"a": 3.0, "b": 3.0, "c": 3.0}, direction)
        assert set(scores.values()) == {10.0}


def test_zero_best_edge_rules():
    assert normalize_values({"a": 0.0, "b": 5.0}, LOWER)[0] == {"a": 10.0, "b": 0.0}
    assert normalize_values({"a": 0.0, "b": 0.0}, LOWER)[0] == {"a": 10.0, "b": 10.0}
    assert normalize_values({"a": -1.0, "b": -4.0}, HIGHER)[0] == {"a": 10.0, "b": 0.0}
    assert normalize_values({"a": 20.0, "b": -4.0}, HIGHER)[0] == {"a": 10.0, "b": 0.0}


def test_undefined_values_flagged():
    scores, _, undefined = normalize_values({"a": 3.0, "b": None, "c": float("nan")}, HIGHER)
    assert undefined == ["b", "c"] and scores == {"a": 10.0, "b": 0.0, "c": 0.0}
    with pytest.raises(ValueError):
        normalize_values({"a": 1.0}, "sideways")


DIR = {k: (LOWER if k in ("pct_time_outside_comfort", "total_degree_hours") else HIGHER) for k in RADAR_KPIS}
finite = st.floats(-50.0, 200.0, allow_nan=False)


@st.composite
def report_sets(draw):
    n = draw(st.integers(1, 5))
    out = []
    for i in range(n):
        values = {k: draw(finite) for k in RADAR_KPIS}
        for k in ("pct_time_outside_comfort", "total_degree_hours"):
            values[k] = abs(values[k])
        out.append(report(f"c{i}", **values))
    return out


@given(report_sets())
def test_anchor_and_range(reports):
    scores = normalize(reports)
    for k in scores.kpis:
        column = [scores.scores[c][k] for c in scores.controllers]
        assert all(0.0 <= v <= 10.0 for v in column)
        assert abs(max(column) - 10.0) <= ANCHOR_TOL


@given(report_sets(), st.sampled_from(RADAR_KPIS), st.floats(1e-3, 1e3))
def test_scale_invariance(reports, kpi, factor):
    scaled = [report(r.controller, **{k: getattr(r, k) * (factor if k == kpi else 1.0) for k in RADAR_KPIS}) for r in reports]
    a, b = normalize(reports), normalize(scaled)
    for c in a.controllers:
        for k in RADAR_KPIS:
            assert a.scores[c][k] == pytest.approx(b.scores[c][k], abs=1e-9)


@given(report_sets())
def test_rank_coherence(reports):
    dominant = report(
        "zz-dominant",
        **{
            k: (max if DIR[k] == HIGHER else min)(getattr(r, k) for r in reports)
            for k in RADAR_KPIS
        },
    )
    entries = rank(normalize(reports + [dominant]))
    assert entries[0].mean_score == 10.0
    top = [e.controller for e in entries if e.mean_score == entries[0].mean_score]
    assert "zz-dominant" in top


def test_single_controller_ranks_first_with_ten():
    entries = rank(normalize([report("a", **{k: 5.0 for k in RADAR_KPIS})]))
    assert [(e.position, e.controller, e.mean_score) for e in entries] == [(1, "a", 10.0)]


def test_rank_means_and_ties():
    scores = RadarScores(
        ["A", "B"], ["k1", "k2"], {"A": {"k1": 10.0, "k2": 10.0}, "B": {"k1": 5.0, "k2": 10.0}}, {}, {}, {}
    )
    entries = rank(scores)
    assert [(e.controller, e.mean_score, e.tied) for e in entries] == [("A", 10.0, False), ("B", 7.5, False)]
    same = RadarScores(["B", "A"], ["k"], {"A": {"k": 4.0}, "B": {"k": 4.0}}, {}, {}, {})
    assert [(e.controller, e.tied) for e in rank(same)] == [("A", True), ("B", True)]


def _three():
    return normalize([
        report("reactive", **{k: 1.0 for k in RADAR_KPIS}),
        report("combinatorial", **{k: 2.0 for k in RADAR_KPIS}),
        report("ga", **{k: 0.0 for k in RADAR_KPIS}),
    ])


def test_radar_shape():
    svg = render_radar(_three())
    assert svg.count('class="controller"') == 3
    assert svg.count('class="axis"') == 6
    assert svg.startswith("<?xml")


def test_radar_zero_score_sits_at_center():
    scores = _three()
    scores.scores["ga"] = {k: 0.0 for k in RADAR_KPIS}
    svg = render_radar(scores)
    points = re.search(r'data-controller="ga" points="([^"]+)"', svg).group(1)
    assert set(points.split()) == {"300.000,300.000"}


def test_radar_bytes_are_deterministic(tmp_path):
    emit_radar(_three(), tmp_path / "a.svg")
    emit_radar(_three(), tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_radar_needs_three_axes():
    scores = normalize([report("a", energy_savings_pct=1.0, pe_savings_pct=1.0)], kpis=("energy_savings_pct", "pe_savings_pct"))
    with pytest.raises(RadarError):
        render_radar(scores)


def test_scores_round_trip():
    scores = _three()
    assert RadarScores.from_dict(scores.to_dict()) == scores
