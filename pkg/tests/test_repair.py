import numpy as np
import pytest

from oreo.catalog import ConfigGraph
from oreo.catalog import ResourceVector as RV
from oreo.engine import solve
from oreo.lagrangian import Multipliers, solve_relaxation
from oreo.performance import InstanceId, required_cpu
from oreo.repair import (SAFETY, budget_enforcement, repair, service_latency_adjustment,
                         service_quality_adjustment, xapp_selection)
from oreo.scenarios import ScenarioParams, generate_scenario
from oreo.state import Assignment, DeploymentState, check_feasibility

from conftest import catalog, function, service

EMPTY = DeploymentState.empty()


def one_node(rate=1.0, T=0.5, Q=0.5, sid="s1", priority=1.0):
    return service(sid, ConfigGraph.build("c1", ["f1"]), priority=priority, T=T, Q=Q, rate=rate)


def test_selection_noop_when_covered():
    cat = catalog([function("f1", (1.0, 0.9))], [one_node()])
    inst = InstanceId("f1", 1, 0)
    relaxed = Assignment({("s1", "c1"): True}, {(("s1", "c1"), inst): True}, {inst: RV(5.0, 1.0, 1.0)})
    out, trace = xapp_selection(relaxed, EMPTY, cat)
    assert len(trace) == 0
    assert out == relaxed


def test_selection_adds_fresh_replica():
    cat = catalog([function("f1", (1.0, 0.9))], [one_node()])
    out, trace = xapp_selection(Assignment({("s1", "c1"): True}), EMPTY, cat)
    assert [a["action"] for a in trace.actions] == ["add"]
    assert list(out.rho) == [InstanceId("f1", 1, 0)]


def test_selection_prefers_sharing_when_cheaper():
    # storage dominates, so a second replica costs more than the extra CPU
    cat = catalog([function("f1", (1.0, 0.9), mem=40.0, disk=40.0)],
                  [one_node(sid="a"), one_node(sid="b")], cpu=100.0)
    inst = InstanceId("f1", 1, 0)
    relaxed = Assignment({("a", "c1"): True, ("b", "c1"): True}, {(("a", "c1"), inst): True},
                         {inst: RV(required_cpu(1.0, 1.0, 0.5), 40.0, 40.0)})
    out, trace = xapp_selection(relaxed, EMPTY, cat)
    (share,) = trace.of("share")
    assert share["cost"] < share["fresh_cost"]
    assert out.users()[inst] == [("a", "c1"), ("b", "c1")]


def test_quality_raises_complexity():
    cat = catalog([function("f1", (1.0, 0.85), (0.8, 0.95))], [one_node(Q=0.9)])
    inst = InstanceId("f1", 1, 0)
    a = Assignment({("s1", "c1"): True}, {(("s1", "c1"), inst): True}, {inst: RV(5.0, 1.0, 1.0)})
    out, trace = service_quality_adjustment(a, cat)
    assert [i.chi for i in out.rho] == [2]
    assert trace.of("raise-complexity")


def test_quality_picks_best_gain_per_cost():
    # raising f1 gains more but costs far more storage than raising f2
    f1 = function("f1", (1.0, 0.9), (1.0, 0.99), mem=1.0, disk=1.0)
    f1 = type(f1)("f1", (f1.xapps[0], type(f1.xapps[1])("f1", 2, 1.0, 0.99, 30.0, 30.0)))
    f2 = function("f2", (1.0, 0.9), (1.0, 0.93))
    s = service("s1", ConfigGraph.build("c1", ["f1", "f2"], [("f1", "f2")]), Q=0.83)
    cat = catalog([f1, f2], [s])
    i1, i2 = InstanceId("f1", 1, 0), InstanceId("f2", 1, 0)
    a = Assignment({("s1", "c1"): True}, {(("s1", "c1"), i1): True, (("s1", "c1"), i2): True},
                   {i1: RV(5, 1, 1), i2: RV(5, 1, 1)})
    _, trace = service_quality_adjustment(a, cat)
    first = trace.of("raise-complexity")[0]
    assert first["function"] == "f2"


def test_latency_single_node():
    cat = catalog([function("f1", (1.0, 0.9))], [one_node(rate=1.0, T=0.5)])
    inst = InstanceId("f1", 1, 0)
    a = Assignment({("s1", "c1"): True}, {(("s1", "c1"), inst): True}, {inst: RV(0.0, 1.0, 1.0)})
    out, _ = service_latency_adjustment(a, cat)
    assert out.rho[inst].cpu == pytest.approx(3.0, rel=1e-8)


def test_latency_noop_when_fast():
    cat = catalog([function("f1", (1.0, 0.9))], [one_node()])
    inst = InstanceId("f1", 1, 0)
    a = Assignment({("s1", "c1"): True}, {(("s1", "c1"), inst): True}, {inst: RV(10.0, 1.0, 1.0)})
    out, trace = service_latency_adjustment(a, cat)
    assert len(trace) == 0 and out == a


def test_latency_shared_instance_sized_for_tightest():
    cat = catalog([function("f1", (1.0, 0.9))], [one_node(sid="a", rate=1.0, T=0.1), one_node(sid="b", rate=2.0, T=0.5)])
    inst = InstanceId("f1", 1, 0)
    a = Assignment({("a", "c1"): True, ("b", "c1"): True},
                   {(("a", "c1"), inst): True, (("b", "c1"), inst): True}, {inst: RV(0.0, 1.0, 1.0)})
    out, _ = service_latency_adjustment(a, cat)
    assert out.rho[inst].cpu == pytest.approx(required_cpu(1.0, 3.0, 0.1 * (1 - SAFETY)), rel=1e-12)


def _two_service(priorities, cpus, budget, rates=(1.0, 1.0)):
    cat = catalog([function("f1", (1.0, 0.9)), function("f2", (1.0, 0.9))],
                  [service("a", ConfigGraph.build("c1", ["f1"]), priority=priorities[0], rate=rates[0]),
                   service("b", ConfigGraph.build("c1", ["f2"]), priority=priorities[1], rate=rates[1])],
                  cpu=budget)
    i1, i2 = InstanceId("f1", 1, 0), InstanceId("f2", 1, 0)
    a = Assignment({("a", "c1"): True, ("b", "c1"): True},
                   {(("a", "c1"), i1): True, (("b", "c1"), i2): True},
                   {i1: RV(cpus[0], 1, 1), i2: RV(cpus[1], 1, 1)})
    return cat, a


def test_budget_within_limits_drops_nothing():
    cat, a = _two_service((1, 2), (3, 3), 10)
    out, dropped, _ = budget_enforcement(a, EMPTY, cat)
    assert dropped == [] and out == a


def test_budget_drops_lowest_priority():
    cat, a = _two_service((1, 2), (3, 3), 5)
    _, dropped, _ = budget_enforcement(a, EMPTY, cat)
    assert dropped == ["a"]


def test_budget_equal_priority_drops_costlier():
    # both already at their minimum CPU, so only a drop can help
    cat, a = _two_service((1, 1), (31, 11), 35, rates=(29.0, 9.0))
    _, dropped, _ = budget_enforcement(a, EMPTY, cat)
    assert dropped == ["a"]


def test_repair_keeps_feasible_plan():
    cat = generate_scenario(ScenarioParams(scale="S", seed=8))
    plan = solve(cat)
    out, trace = repair(plan.assignment, EMPTY, cat)
    assert out == plan.assignment and len(trace) == 0


def test_repair_empty():
    cat = generate_scenario(ScenarioParams(scale="S", seed=8))
    out, trace = repair(Assignment(), EMPTY, cat)
    assert out == Assignment() and len(trace) == 0


@pytest.mark.parametrize("seed", range(100))
def test_repair_random_relaxations_are_feasible(seed):
    cat = generate_scenario(ScenarioParams(scale="S", seed=seed))
    rng = np.random.default_rng(seed)
    m = Multipliers.zeros(cat)
    for d in (m.beta, m.gamma, m.delta):
        for k in d:
            d[k] = float(rng.exponential(0.3))
    out, _ = repair(solve_relaxation(m, EMPTY, cat), EMPTY, cat)
    rep = check_feasibility(out, EMPTY, cat)
    assert rep.feasible, rep.to_dict()
