import sys

import pytest

from oreo.catalog import Catalog, ConfigGraph, FunctionSpec, ResourceVector, ServiceSpec, XAppSpec


def function(fid, *levels, mem=1.0, disk=1.0):
    """levels: (theta, q_base) per complexity, chi counted from 1."""
    return FunctionSpec(fid, tuple(XAppSpec(fid, chi, th, q, mem, disk)
                                   for chi, (th, q) in enumerate(levels, start=1)))


def node(f="f1", cid="c1"):
    """A fresh single-function configuration (services may not share graph objects)."""
    return ConfigGraph.build(cid, [f])


def service(sid, *configs, priority=1.0, T=0.5, Q=0.5, rate=1.0):
    return ServiceSpec(sid, priority, T, Q, rate, tuple(configs))


def catalog(functions, services, cpu=100.0, mem=100.0, disk=100.0):
    return Catalog({f.id: f for f in functions}, {s.id: s for s in services},
                   ResourceVector(cpu, mem, disk))


@pytest.fixture
def single():
    """One service, one config, one function."""
    f = function("f1", (1.0, 0.9))
    s = service("s1", ConfigGraph.build("c1", ["f1"]), priority=2.0, T=0.5, Q=0.8, rate=1.0)
    return catalog([f], [s], cpu=50.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
