import numpy as np
import pytest

from oreo.catalog import ConfigGraph
from oreo.lagrangian import (Multipliers, StepSchedule, Subgradients, big_m, closed_form_cpu, lagrangian_value,
                             lr1_scores, solve_lr1, solve_lr2, solve_relaxation, subgradients, update_multipliers)
from oreo.scenarios import ScenarioParams, generate_scenario
from oreo.state import Assignment, DeploymentState, objective

from conftest import catalog, function, node, service


def two_config_catalog():
    f = [function("f1", (1.0, 0.9)), function("f2", (1.0, 0.9))]
    s = service("s1", ConfigGraph.build("c1", ["f1"]), ConfigGraph.build("c2", ["f2"]), priority=2.0, Q=0.5)
    return catalog(f, [s])


def test_big_m():
    f = function("f1", (1, 0.9))
    three = catalog([f], [service(f"s{t}", node(), T=t) for t in (0.1, 0.2, 0.5)])
    assert big_m(three) == 50.0
    assert big_m(catalog([f], [service("s", node(), T=1.0)])) == 100.0
    assert big_m(catalog([f], [])) == 0.0


def test_zero_multipliers_recover_objective():
    cat = generate_scenario(ScenarioParams(scale="S", seed=2))
    relaxed = solve_relaxation(Multipliers.zeros(cat), DeploymentState.empty(), cat)
    a = relaxed.assignment
    total, _, _ = lagrangian_value(a.z, a.v, a.rho, Multipliers.zeros(cat), cat)
    assert total == pytest.approx(objective(a, cat), abs=1e-12)


def test_empty_point_value():
    cat = two_config_catalog()
    m = Multipliers.zeros(cat)
    m.delta[("s1", "c1")] = 0.3
    m.delta[("s1", "c2")] = 0.7
    total, _, _ = lagrangian_value({}, {}, {}, m, cat)
    assert total == pytest.approx((0.3 + 0.7) * (big_m(cat) + 0.5))


def test_beta_cancels_priority():
    cat = two_config_catalog()
    m = Multipliers.zeros(cat)
    m.beta[(("s1", "c1"), "f1")] = 2.0
    assert lr1_scores(m, cat)[("s1", "c1")] == 0.0


def test_lr1_at_most_one_config_per_service():
    cat = generate_scenario(ScenarioParams(scale="S", seed=4))
    z = solve_lr1(Multipliers.zeros(cat), cat)
    for sid in cat.service_ids:
        picked = [k for k, on in z.items() if on and k[0] == sid]
        assert len(picked) <= 1


def test_lr1_zero_multipliers_first_config_small():
    assert solve_lr1(Multipliers.zeros(two_config_catalog()), two_config_catalog())[("s1", "c1")]


def test_lr1_forced_rejection():
    cat = two_config_catalog()
    m = Multipliers.zeros(cat)
    for key in cat.config_keys:
        m.delta[key] = 2.0 / big_m(cat)
    assert not any(solve_lr1(m, cat).values())


def test_lr1_argmax():
    cat = two_config_catalog()
    m = Multipliers.zeros(cat)
    m.beta[(("s1", "c1"), "f1")] = 1.0  # scores 1.0 and 2.0
    z = solve_lr1(m, cat)
    assert z == {("s1", "c1"): False, ("s1", "c2"): True}


def test_lr2_zero_multipliers_deploys_nothing():
    cat = generate_scenario(ScenarioParams(scale="S", seed=5))
    v, rho, bound = solve_lr2(Multipliers.zeros(cat), None, cat)
    assert v == {} and rho == {} and bound == 0.0


def test_lr2_positive_marginal_selects_candidate():
    cat = two_config_catalog()
    m = Multipliers.zeros(cat)
    m.beta[(("s1", "c1"), "f1")] = 10.0
    v, rho, _ = solve_lr2(m, None, cat)
    assert [i.function_id for (k, i) in v] == ["f1"]


def test_closed_form_cpu_example():
    assert closed_form_cpu(0.0, 1.0, 1.0, 4.0) == 2.0


def test_closed_form_cpu_matches_scan():
    lam, d, theta, kb = 0.0, 1.0, 1.0, 4.0
    grid = np.linspace(lam / theta + 1e-4, 10, 1_000_001)
    cost = grid / kb + d / (grid * theta - lam)
    assert closed_form_cpu(lam, d, theta, kb) == pytest.approx(grid[np.argmin(cost)], rel=1e-5)


def test_subgradient_uncovered_function():
    cat = two_config_catalog()
    g = subgradients(Assignment({("s1", "c1"): True}), cat)
    assert g.beta[(("s1", "c1"), "f1")] == 1.0


def test_subgradient_empty_delta():
    cat = two_config_catalog()
    g = subgradients(Assignment(), cat)
    assert g.delta[("s1", "c1")] == -0.5 - big_m(cat)


def test_zero_subgradient_converges():
    m = Multipliers({("k", "f"): 0.5}, {}, {})
    g = Subgradients({("k", "f"): 0.0}, {}, {})
    sched = StepSchedule()
    out = update_multipliers(m, g, sched, 1.0, 0.5)
    assert out.beta == m.beta and sched.converged


def test_projection_keeps_zero():
    m = Multipliers({}, {"k": 0.0}, {})
    out = update_multipliers(m, Subgradients({}, {"k": -1.0}, {}), StepSchedule(), 1.0, 0.0)
    assert out.gamma["k"] == 0.0


def test_step_halves_after_n_non_improving():
    sched = StepSchedule(mu=2.0, N=5)
    m = Multipliers({}, {"k": 1.0}, {})
    g = Subgradients({}, {"k": 1.0}, {})
    update_multipliers(m, g, sched, 2.0, 1.0)  # first call improves from -inf
    for _ in range(5):
        update_multipliers(m, g, sched, 2.0, 1.0)
    assert sched.mu == 1.0


def test_relaxed_bound_dominates_objective():
    cat = generate_scenario(ScenarioParams(scale="S", seed=6))
    rng = np.random.default_rng(0)
    m = Multipliers.zeros(cat)
    for d in (m.beta, m.gamma, m.delta):
        for k in d:
            d[k] = float(rng.exponential(0.5))
    relaxed = solve_relaxation(m, None, cat)
    assert relaxed.bound >= relaxed.value - 1e-9
