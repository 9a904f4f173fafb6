import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oreo.catalog import ConfigGraph, XAppSpec
from oreo.performance import (InstanceId, UnstableQueueError, aggregate_load, config_quality, critical_path,
                              required_cpu, service_latency, xapp_latency)
from oreo.state import Assignment

from conftest import catalog, function, node, service


def spec(q, theta=1.0):
    return XAppSpec("f", 1, theta, q, 0, 0)


@pytest.mark.parametrize("cpu, theta, lam, expect", [(2.0, 1.0, 1.0, 1.0), (11.0, 1.0, 1.0, 0.1)])
def test_latency(cpu, theta, lam, expect):
    assert xapp_latency(cpu, theta, lam) == pytest.approx(expect, rel=1e-15)


def test_stability_boundary():
    with pytest.raises(UnstableQueueError):
        xapp_latency(1.0, 1.0, 1.0)


@pytest.mark.parametrize("theta, lam, target, expect", [(1.0, 1.0, 0.5, 3.0), (2.0, 0.0, 1.0, 0.5)])
def test_required_cpu(theta, lam, target, expect):
    assert required_cpu(theta, lam, target) == pytest.approx(expect, rel=1e-15)


@given(st.floats(0.1, 10), st.floats(0, 50), st.floats(1e-3, 2))
def test_round_trip(theta, lam, target):
    cpu = required_cpu(theta, lam, target)
    assert xapp_latency(cpu, theta, lam) == pytest.approx(target, rel=1e-12)


def test_aggregate_load():
    cat = catalog([function("f1", (1, 0.9))], [service("a", node(), rate=2.0), service("b", node(), rate=3.0),
                                               service("c", node(), rate=4.0)])
    inst = InstanceId("f1", 1, 0)
    idle = InstanceId("f1", 1, 1)
    a = Assignment({("a", "c1"): True, ("b", "c1"): True},
                   {(("a", "c1"), inst): True, (("b", "c1"), inst): True})
    assert aggregate_load(inst, a, cat) == 5.0
    assert aggregate_load(idle, a, cat) == 0.0
    one = Assignment({("c", "c1"): True}, {(("c", "c1"), inst): True})
    assert aggregate_load(inst, one, cat) == 4.0


def test_quality_single():
    assert config_quality(ConfigGraph.build("c", ["f1"]), {"f1": spec(0.9)})[1] == 0.9


def test_quality_chain():
    cfg = ConfigGraph.build("c", ["f1", "f2"], [("f1", "f2")])
    assert config_quality(cfg, {"f1": spec(0.9), "f2": spec(0.8)})[1] == pytest.approx(0.72, abs=1e-15)


def test_quality_merge_takes_weakest_input():
    cfg = ConfigGraph.build("c", ["f1", "f2", "f3"], [("f1", "f3"), ("f2", "f3")])
    q = config_quality(cfg, {"f1": spec(0.9), "f2": spec(1.0), "f3": spec(0.95)})[1]
    assert q == pytest.approx(0.855, abs=1e-15)


@pytest.mark.parametrize("nodes, edges, lat, expect", [
    (["f1"], [], {"f1": 0.3}, 0.3),
    (["f1", "f2", "f3"], [("f1", "f3"), ("f2", "f3")], {"f1": 0.1, "f2": 0.3, "f3": 0.1}, 0.4),
    (["f1", "f2", "f3"], [("f1", "f2"), ("f2", "f3")], {"f1": 0.1, "f2": 0.1, "f3": 0.1}, 0.3),
])
def test_service_latency(nodes, edges, lat, expect):
    cfg = ConfigGraph.build("c", nodes, edges)
    assert service_latency(cfg, lat) == pytest.approx(expect, abs=1e-15)


def test_critical_path():
    cfg = ConfigGraph.build("c", ["f1", "f2", "f3"], [("f1", "f3"), ("f2", "f3")])
    assert critical_path(cfg, {"f1": 0.1, "f2": 0.3, "f3": 0.1}) == ("f2", "f3")


def test_round_trip_vectorised_sample():
    rng = np.random.default_rng(0)
    for theta, lam, target in zip(rng.uniform(0.1, 5, 500), rng.uniform(0, 30, 500), rng.uniform(1e-3, 1, 500)):
        got = xapp_latency(required_cpu(theta, lam, target), theta, lam)
        assert math.isclose(got, target, rel_tol=1e-12)
