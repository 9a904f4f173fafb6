import math

import pytest

from oreo.exact import OracleLimits
from oreo.experiment import (CSV_COLUMNS, Z90, EpochSequence, RunReport, read_csv, reports_to_csv,
                             run_experiment, summarize)
from oreo.scenarios import ScenarioParams, generate_scenario


def fake(policy, value, seed=0, stop="GAP", scenario="S"):
    return RunReport(scenario, policy, seed, 0, 8, 1.0, 8.0, 5, 0.5, 0.1, 0.1, value, value, {"s": 0.5},
                     {"s": 1.1}, 1.0, stop)


def test_empty_request_set():
    reports = run_experiment(ScenarioParams(n_services=0), runs=1, epochs=1)
    assert reports and all(r.deployed_fraction == 0 and r.objective == 0 and r.xapp_count == 0 for r in reports)


def test_epoch_lifetime():
    cat = generate_scenario(ScenarioParams(scale="S", seed=0))
    seq = EpochSequence.draw(cat, 5, seed=0, overlap=1)
    for sid, a in seq.arrivals.items():
        assert sid in seq.departing(a + seq.lifetime)
        assert all(sid in seq.alive(e) for e in range(a, a + seq.lifetime))


def test_reports_pass_checker_and_bounds():
    reports = run_experiment(ScenarioParams(scale="S"), ("oreo", "exact", "baseline"), runs=2, epochs=3, seed=5)
    assert len(reports) == 2 * 3 * 3
    for r in reports:
        if r.completed:
            assert all(v <= 1.0 for v in r.norm_latency.values())
            assert all(v >= 1.0 - 1e-12 for v in r.norm_quality.values())
    by = {(r.seed, r.epoch, r.policy): r for r in reports}
    for (seed, epoch, policy), r in by.items():
        if policy == "exact" and r.completed:
            assert by[(seed, epoch, "oreo")].objective <= r.objective + 1e-9


def test_csv_columns_and_blank_timing(tmp_path):
    reports = run_experiment(ScenarioParams(scale="S"), runs=1, epochs=2)
    reports_to_csv(reports, tmp_path / "r.csv")
    rows = read_csv(tmp_path / "r.csv")
    assert tuple(rows[0]) == CSV_COLUMNS
    assert all(r["wall_time_ms"] == "" for r in rows)
    reports_to_csv(reports, tmp_path / "t.csv", record_timing=True)
    assert all(float(r["wall_time_ms"]) >= 0 for r in read_csv(tmp_path / "t.csv"))


def test_exceeded_rows_are_blank(tmp_path):
    reports = run_experiment(ScenarioParams(scale="M"), ("exact",), runs=1, epochs=1,
                             limits=OracleLimits(max_nodes=1))
    assert reports[0].stop_reason == "EXCEEDED"
    reports_to_csv(reports, tmp_path / "r.csv")
    row = read_csv(tmp_path / "r.csv")[0]
    assert row["objective"] == "" and row["stop_reason"] == "EXCEEDED"


def test_identical_reports_zero_width():
    (row,) = summarize([fake("baseline", 2.0, seed=s) for s in range(4)])
    assert row["objective_mean"] == 2.0 and row["objective_ci90"] == 0.0


def test_three_value_interval():
    rows = [fake("oreo", v, seed=i) for i, v in enumerate((0.8, 0.9, 1.0))]
    (row,) = summarize(rows)
    assert row["objective_mean"] == pytest.approx(0.9)
    assert row["objective_ci90"] == pytest.approx(Z90 * 0.1 / math.sqrt(3))
    assert Z90 == pytest.approx(1.6448536269514722)


def test_ratio_only_where_oracle_completed():
    rows = [fake("oreo", 0.9, 0), fake("exact", 1.0, 0), fake("oreo", 0.5, 1), fake("exact", math.nan, 1, "EXCEEDED")]
    oreo = next(r for r in summarize(rows) if r["policy"] == "oreo")
    assert oreo["alpha_n"] == 1 and oreo["alpha_mean"] == pytest.approx(0.9)


def test_all_exceeded_gives_missing_ratio():
    rows = [fake("oreo", 0.9, s) for s in range(3)] + [fake("exact", math.nan, s, "EXCEEDED") for s in range(3)]
    oreo = next(r for r in summarize(rows) if r["policy"] == "oreo")
    assert oreo["alpha_n"] == 0 and math.isnan(oreo["alpha_mean"])


def test_unknown_policy():
    with pytest.raises(ValueError):
        run_experiment(ScenarioParams(), ("greedy",))
