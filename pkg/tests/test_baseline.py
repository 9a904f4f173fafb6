import pytest

from oreo.baseline import solve_baseline
from oreo.engine import solve
from oreo.performance import InstanceId, required_cpu
from oreo.repair import SAFETY
from oreo.scenarios import ScenarioParams, generate_scenario
from oreo.state import Assignment, DeploymentState, check_feasibility

from conftest import catalog, function, node, service


def twins(cpu):
    return catalog([function("f1", (1.0, 0.9))],
                   [service("a", node(), priority=2.0, T=0.1, rate=1.0),
                    service("b", node(), priority=1.0, T=0.1, rate=1.0)], cpu=cpu)


def test_abundant_budget_deploys_everything_unshared():
    cat = generate_scenario(ScenarioParams(scale="S", seed=0, cpu_budget_factor=50.0))
    cat = type(cat)(cat.functions, cat.services, cat.budget.replace(mem=1e6, disk=1e6), cat.meta)
    plan = solve_baseline(cat)
    assert plan.assignment.deployed_services() == set(cat.services)
    assert all(len(users) == 1 for users in plan.assignment.users().values())
    assert check_feasibility(plan.assignment, DeploymentState.empty(), cat).feasible


def test_no_sharing_means_only_higher_priority_fits():
    mono = required_cpu(1.0, 1.0, 0.1 * (1 - SAFETY))
    cat = twins(1.5 * mono)
    plan = solve_baseline(cat)
    assert plan.assignment.deployed_services() == {"a"}


def test_sharing_fits_both():
    cat = twins(1.5 * required_cpu(1.0, 1.0, 0.1))
    shared = solve(cat)
    mono = solve_baseline(cat)
    assert shared.assignment.deployed_services() == {"a", "b"}
    assert mono.assignment.deployed_services() == {"a"}
    per_service = len(mono.assignment.rho) / 1, len(shared.assignment.rho) / 2
    assert per_service[0] > per_service[1]


def test_continuing_service_keeps_its_monolith():
    cat = twins(100.0)
    first = solve_baseline(cat)
    state = DeploymentState.after(first.assignment, {"a", "b"})
    second = solve_baseline(cat, state)
    assert second.assignment.rho == first.assignment.rho
    assert check_feasibility(second.assignment, state, cat).feasible


def test_fresh_ids_avoid_previous_instances():
    cat = twins(100.0)
    old = InstanceId("f1", 1, 0)
    prev = Assignment({("a", "c1"): True}, {(("a", "c1"), old): True},
                      {old: type(cat.budget)(5.0, 1.0, 1.0)})
    plan = solve_baseline(cat, DeploymentState(prev, frozenset()))
    assert old not in plan.assignment.rho


@pytest.mark.parametrize("seed", range(5))
def test_generated_plans_are_feasible(seed):
    cat = generate_scenario(ScenarioParams(scale="M", seed=seed))
    plan = solve_baseline(cat)
    assert check_feasibility(plan.assignment, DeploymentState.empty(), cat).feasible
