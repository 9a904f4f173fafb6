"""Static problem universe: functions, their xApp implementations, services and
the configuration graphs that realize them.

Everything here is immutable once built. Derived structures (paths, topological
orders, reverse indexes) are cached on first access.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

RESOURCES = ("cpu", "mem", "disk")
K = len(RESOURCES)


class StructuralError(ValueError):
    """Raised when a configuration graph is not a DAG or is otherwise malformed."""


@dataclass(frozen=True)
class ResourceVector:
    cpu: float = 0.0
    mem: float = 0.0
    disk: float = 0.0

    def __getitem__(self, k):
        if isinstance(k, str):
            return getattr(self, k)
        return (self.cpu, self.mem, self.disk)[k]

    def __iter__(self):
        return iter((self.cpu, self.mem, self.disk))

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem, self.disk + other.disk)

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu - other.cpu, self.mem - other.mem, self.disk - other.disk)

    def replace(self, **kw) -> "ResourceVector":
        vals = {"cpu": self.cpu, "mem": self.mem, "disk": self.disk}
        vals.update(kw)
        return ResourceVector(**vals)

    def normalized(self, budget: "ResourceVector") -> float:
        """Sum over resource types of the fraction of budget used."""
        return self.cpu / budget.cpu + self.mem / budget.mem + self.disk / budget.disk

    def to_dict(self) -> dict:
        return {"cpu": self.cpu, "mem": self.mem, "disk": self.disk}


ZERO = ResourceVector()


@dataclass(frozen=True)
class XAppSpec:
    function_id: str
    chi: int
    theta: float
    q_base: float
    mem_req: float
    disk_req: float


@dataclass(frozen=True)
class FunctionSpec:
    id: str
    xapps: tuple[XAppSpec, ...]

    @cached_property
    def by_chi(self) -> dict[int, XAppSpec]:
        return {x.chi: x for x in self.xapps}

    @cached_property
    def chis(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_chi))


@dataclass(frozen=True)
class ConfigGraph:
    id: str
    nodes: frozenset[str]
    edges: tuple[tuple[str, str], ...] = ()

    @classmethod
    def build(cls, id: str, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()) -> "ConfigGraph":
        return cls(id, frozenset(nodes), tuple(sorted(tuple(e) for e in edges)))

    @cached_property
    def predecessors(self) -> dict[str, tuple[str, ...]]:
        preds: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            if b in preds:
                preds[b].append(a)
        return {n: tuple(sorted(p)) for n, p in preds.items()}

    @cached_property
    def successors(self) -> dict[str, tuple[str, ...]]:
        succ: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            if a in succ:
                succ[a].append(b)
        return {n: tuple(sorted(s)) for n, s in succ.items()}

    @cached_property
    def sources(self) -> tuple[str, ...]:
        return tuple(sorted(n for n, p in self.predecessors.items() if not p))

    @cached_property
    def sinks(self) -> tuple[str, ...]:
        return tuple(sorted(n for n, s in self.successors.items() if not s))

    @cached_property
    def paths(self) -> tuple[tuple[str, ...], ...]:
        return tuple(enumerate_paths(self))

    @cached_property
    def order(self) -> tuple[str, ...]:
        return tuple(topological_order(self))

    @cached_property
    def depth(self) -> int:
        """Number of nodes on the longest source-to-sink path."""
        return max(len(p) for p in self.paths)


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    priority: float
    target_latency: float
    target_quality: float
    input_rate: float
    configs: tuple[ConfigGraph, ...]

    @cached_property
    def config_by_id(self) -> dict[str, ConfigGraph]:
        return {c.id: c for c in self.configs}


@dataclass(frozen=True)
class Catalog:
    functions: Mapping[str, FunctionSpec]
    services: Mapping[str, ServiceSpec]
    budget: ResourceVector
    meta: Mapping = field(default_factory=dict, compare=False)

    def xapp(self, function_id: str, chi: int) -> XAppSpec:
        return self.functions[function_id].by_chi[chi]

    def config(self, key: tuple[str, str]) -> ConfigGraph:
        return self.services[key[0]].config_by_id[key[1]]

    @cached_property
    def service_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.services))

    @cached_property
    def config_keys(self) -> tuple[tuple[str, str], ...]:
        """All (service_id, config_id) pairs, sorted."""
        return tuple(sorted((s.id, c.id) for s in self.services.values() for c in s.configs))

    @cached_property
    def configs_using(self) -> dict[str, tuple[tuple[str, str], ...]]:
        """function id -> config keys whose graph contains it."""
        out: dict[str, list] = {f: [] for f in self.functions}
        for key in self.config_keys:
            for f in self.config(key).nodes:
                out.setdefault(f, []).append(key)
        return {f: tuple(v) for f, v in out.items()}

    @cached_property
    def max_target_latency(self) -> float:
        return max((s.target_latency for s in self.services.values()), default=0.0)

    def restrict(self, service_ids: Iterable[str]) -> "Catalog":
        """Same universe, request set limited to ``service_ids``."""
        keep = set(service_ids)
        return Catalog(self.functions, {s: v for s, v in self.services.items() if s in keep},
                       self.budget, self.meta)


@dataclass(frozen=True)
class Violation:
    kind: str
    entity: str
    detail: str = ""


def enumerate_paths(config: ConfigGraph) -> list[tuple[str, ...]]:
    """All maximal source-to-sink paths, sorted lexicographically."""
    succ = config.successors
    out: list[tuple[str, ...]] = []

    def walk(node, trail, on_stack):
        if node in on_stack:
            raise StructuralError(f"cycle through {node!r} in config {config.id!r}")
        trail = trail + (node,)
        nxt = succ[node]
        if not nxt:
            out.append(trail)
            return
        on_stack = on_stack | {node}
        for n in nxt:
            walk(n, trail, on_stack)

    sources = config.sources
    if config.nodes and not sources:
        raise StructuralError(f"config {config.id!r} has no source (cycle)")
    for s in sources:
        walk(s, (), frozenset())
    covered = {n for p in out for n in p}
    if covered != set(config.nodes):
        raise StructuralError(f"config {config.id!r} has nodes off every source path (cycle)")
    return sorted(out)


def topological_order(config: ConfigGraph) -> list[str]:
    """Kahn's algorithm with ascending-id tie breaking."""
    indeg = {n: len(p) for n, p in config.predecessors.items()}
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in config.successors[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    if len(order) != len(config.nodes):
        raise StructuralError(f"cycle in config {config.id!r}")
    return order


def _validate_config(svc: ServiceSpec, c: ConfigGraph, functions) -> list[Violation]:
    ent = f"{svc.id}/{c.id}"
    out = []
    if not c.nodes:
        return [Violation("empty configuration", ent)]
    for f in sorted(c.nodes):
        if f not in functions:
            out.append(Violation("dangling function reference", ent, f))
    for a, b in c.edges:
        if a not in c.nodes or b not in c.nodes:
            out.append(Violation("edge endpoint not in nodes", ent, f"{a}->{b}"))
        elif a == b:
            out.append(Violation("cycle", ent, f"self-loop on {a}"))
    if any(v.kind in ("edge endpoint not in nodes", "cycle") for v in out):
        return out
    try:
        topological_order(c)
    except StructuralError as exc:
        out.append(Violation("cycle", ent, str(exc)))
        return out
    if not c.sources:
        out.append(Violation("no source", ent))
    if not c.sinks:
        out.append(Violation("no sink", ent))
    return out


def validate_catalog(catalog: Catalog) -> list[Violation]:
    """Every violated structural invariant, each tagged with the offending entity."""
    out: list[Violation] = []
    b = catalog.budget
    if not all(x > 0 for x in b):
        out.append(Violation("nonpositive budget", "budget", str(b.to_dict())))

    for fid in sorted(catalog.functions):
        fn = catalog.functions[fid]
        if fn.id != fid:
            out.append(Violation("function id mismatch", fid, fn.id))
        if not fn.xapps:
            out.append(Violation("no complexity factor", fid))
            continue
        chis = [x.chi for x in fn.xapps]
        if len(set(chis)) != len(chis):
            out.append(Violation("duplicate complexity factor", fid))
        for x in fn.xapps:
            ent = f"{fid}@{x.chi}"
            if x.function_id != fid:
                out.append(Violation("function id mismatch", ent, x.function_id))
            if not x.theta > 0:
                out.append(Violation("nonpositive theta", ent, repr(x.theta)))
            if not 0 < x.q_base <= 1:
                out.append(Violation("quality out of range", ent, repr(x.q_base)))
            if x.mem_req < 0 or x.disk_req < 0:
                out.append(Violation("negative storage requirement", ent))
        ordered = sorted(fn.xapps, key=lambda x: x.chi)
        for lo, hi in zip(ordered, ordered[1:]):
            if hi.q_base < lo.q_base or hi.theta >= lo.theta:
                out.append(Violation("non-monotone complexity", fid, f"chi {lo.chi} -> {hi.chi}"))

    seen_configs: dict[int, str] = {}
    for sid in sorted(catalog.services):
        svc = catalog.services[sid]
        if svc.id != sid:
            out.append(Violation("service id mismatch", sid, svc.id))
        for name in ("priority", "target_latency", "input_rate"):
            val = getattr(svc, name)
            if not (math.isfinite(val) and val > 0):
                out.append(Violation("invalid target", sid, f"{name}={val!r}"))
        if not (0 < svc.target_quality <= 1):
            out.append(Violation("invalid target", sid, f"target_quality={svc.target_quality!r}"))
        if not svc.configs:
            out.append(Violation("no configuration", sid))
        ids = [c.id for c in svc.configs]
        if len(set(ids)) != len(ids):
            out.append(Violation("duplicate config id", sid))
        for c in svc.configs:
            if id(c) in seen_configs and seen_configs[id(c)] != sid:
                out.append(Violation("configuration shared across services", f"{sid}/{c.id}"))
            seen_configs[id(c)] = sid
            out.extend(_validate_config(svc, c, catalog.functions))
    return out
