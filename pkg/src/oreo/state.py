"""Decisions, near-RT RIC deployment state, the objective and the feasibility checker.

The checker is deliberately written against the raw decision maps and only
borrows the queueing/quality primitives from :mod:`oreo.performance`, so it can
serve as an independent referee for every solver in the package.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .catalog import RESOURCES, Catalog, K, ResourceVector
from .performance import InstanceId, config_quality, latency_or_inf, service_latency

ConfigKey = tuple[str, str]

QUALITY_TOL = 1e-12
LATENCY_TOL = 1e-12
BUDGET_TOL = 1e-9

TAGS = ("CFG-UNIQUE", "FUNC-COVER", "FUNC-FOREIGN", "STORAGE", "QUALITY", "LATENCY", "BUDGET", "TRANSITION")


@dataclass
class Assignment:
    """Full decision triple: selected configurations, xApp instance use, resources."""

    z: dict[ConfigKey, bool] = field(default_factory=dict)
    v: dict[tuple[ConfigKey, InstanceId], bool] = field(default_factory=dict)
    rho: dict[InstanceId, ResourceVector] = field(default_factory=dict)

    def copy(self) -> "Assignment":
        return Assignment(dict(self.z), dict(self.v), dict(self.rho))

    def selected(self) -> list[ConfigKey]:
        return sorted(k for k, on in self.z.items() if on)

    def deployed_services(self) -> set[str]:
        return {k[0] for k, on in self.z.items() if on}

    def chosen(self) -> dict[ConfigKey, dict[str, list[InstanceId]]]:
        """config -> function -> instances it uses (normally exactly one)."""
        out: dict[ConfigKey, dict[str, list[InstanceId]]] = defaultdict(lambda: defaultdict(list))
        for (key, inst), on in sorted(self.v.items()):
            if on:
                out[key][inst.function_id].append(inst)
        return out

    def users(self) -> dict[InstanceId, list[ConfigKey]]:
        out: dict[InstanceId, list[ConfigKey]] = defaultdict(list)
        for (key, inst), on in sorted(self.v.items()):
            if on:
                out[inst].append(key)
        return out

    def used_instances(self) -> set[InstanceId]:
        return {inst for (_, inst), on in self.v.items() if on}

    def total(self) -> ResourceVector:
        cpu = mem = disk = 0.0
        for inst in sorted(self.rho):
            r = self.rho[inst]
            cpu += r.cpu
            mem += r.mem
            disk += r.disk
        return ResourceVector(cpu, mem, disk)

    def to_dict(self) -> dict:
        return {
            "z": [{"service": s, "config": c} for (s, c) in self.selected()],
            "v": [{"service": k[0], "config": k[1], "function": i.function_id, "chi": i.chi, "j": i.j}
                  for (k, i), on in sorted(self.v.items()) if on],
            "rho": [{"function": i.function_id, "chi": i.chi, "j": i.j, **self.rho[i].to_dict()}
                    for i in sorted(self.rho)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Assignment":
        z = {(e["service"], e["config"]): True for e in d.get("z", [])}
        v = {((e["service"], e["config"]), InstanceId(e["function"], int(e["chi"]), int(e["j"]))): True
             for e in d.get("v", [])}
        rho = {InstanceId(e["function"], int(e["chi"]), int(e["j"])):
               ResourceVector(float(e["cpu"]), float(e["mem"]), float(e["disk"])) for e in d.get("rho", [])}
        return cls(z, v, rho)


@dataclass(frozen=True)
class DeploymentState:
    """What the near-RT RIC is running before this decision epoch."""

    previous: Assignment = field(default_factory=Assignment)
    continuing: frozenset[str] = frozenset()

    @classmethod
    def empty(cls) -> "DeploymentState":
        return cls()

    @classmethod
    def after(cls, committed: Assignment, request: set[str] | frozenset[str]) -> "DeploymentState":
        """State for the next epoch: services still requested keep running."""
        return cls(committed.copy(), frozenset(committed.deployed_services() & set(request)))

    def to_dict(self) -> dict:
        return {"previous": self.previous.to_dict(), "continuing": sorted(self.continuing)}

    @classmethod
    def from_dict(cls, d: dict) -> "DeploymentState":
        return cls(Assignment.from_dict(d.get("previous", {})), frozenset(d.get("continuing", [])))


@dataclass(frozen=True)
class ConstraintViolation:
    tag: str
    entities: tuple[str, ...]
    slack: float

    def to_dict(self) -> dict:
        return {"tag": self.tag, "entities": list(self.entities),
                "slack": self.slack if math.isfinite(self.slack) else "inf"}


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[ConstraintViolation, ...] = ()

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {v.tag for v in self.violations}

    def of(self, tag: str) -> list[ConstraintViolation]:
        return [v for v in self.violations if v.tag == tag]

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "violations": [v.to_dict() for v in self.violations]}


def objective(assignment: Assignment, catalog: Catalog) -> float:
    """Priority-weighted deployed services minus mean normalized resource use."""
    gain = sum(catalog.services[s].priority for (s, _), on in assignment.z.items() if on)
    b = catalog.budget
    used = sum(r.cpu / b.cpu + r.mem / b.mem + r.disk / b.disk for r in assignment.rho.values())
    return gain - used / K


def transition_sets(state: DeploymentState, new_assignment: Assignment) -> tuple[set[InstanceId], set[InstanceId]]:
    """Instances that must coexist while continuing services are reconfigured.

    Only continuing services that stay deployed in ``new_assignment`` count: a
    service that is dropped has no operation left to protect.
    """
    keep = set(state.continuing) & new_assignment.deployed_services()
    prev = state.previous
    f1 = {inst for (key, inst), on in prev.v.items() if on and key[0] in keep and prev.z.get(key, False)}
    f2 = {inst for (key, inst), on in new_assignment.v.items()
          if on and key[0] in keep and new_assignment.z.get(key, False)}
    return f1, f2


def transition_budget_check(f1, f2, state: DeploymentState, new_assignment: Assignment,
                            catalog: Catalog) -> list[ConstraintViolation]:
    """Old-only instances plus new continuing instances must fit the budget."""
    out = []
    for k in RESOURCES:
        old = sum(state.previous.rho[i][k] for i in sorted(f1 - f2) if i in state.previous.rho)
        new = sum(new_assignment.rho[i][k] for i in sorted(f2) if i in new_assignment.rho)
        cap = catalog.budget[k]
        if old + new > cap * (1 + BUDGET_TOL):
            out.append(ConstraintViolation("TRANSITION", (k,), old + new - cap))
    return out


def check_feasibility(assignment: Assignment, state: DeploymentState, catalog: Catalog) -> ViolationReport:
    out: list[ConstraintViolation] = []
    z, v, rho = assignment.z, assignment.v, assignment.rho

    per_service = defaultdict(int)
    for (s, c), on in z.items():
        if on:
            per_service[s] += 1
    for s in sorted(per_service):
        if per_service[s] > 1:
            out.append(ConstraintViolation("CFG-UNIQUE", (s,), per_service[s] - 1))

    known_configs = set(catalog.config_keys)
    for (s, c), on in sorted(z.items()):
        if on and (s, c) not in known_configs:
            out.append(ConstraintViolation("FUNC-FOREIGN", (s, c), 1.0))

    count: dict[tuple[ConfigKey, str], list[InstanceId]] = defaultdict(list)
    for (key, inst), on in sorted(v.items()):
        if not on:
            continue
        fn = catalog.functions.get(inst.function_id)
        if key not in known_configs or fn is None or inst.chi not in fn.by_chi \
                or inst.function_id not in catalog.config(key).nodes:
            out.append(ConstraintViolation("FUNC-FOREIGN", (key[0], key[1], str(inst)), 1.0))
            continue
        count[(key, inst.function_id)].append(inst)

    for key in catalog.config_keys:
        want = 1 if z.get(key, False) else 0
        for f in sorted(catalog.config(key).nodes):
            got = len(count.get((key, f), ()))
            if got != want:
                out.append(ConstraintViolation("FUNC-COVER", (key[0], key[1], f), float(abs(got - want))))

    # load seen by each instance: every selected config that routes through it
    load: dict[InstanceId, float] = defaultdict(float)
    used: set[InstanceId] = set()
    for (key, f), insts in count.items():
        for inst in insts:
            used.add(inst)
            if z.get(key, False):
                load[inst] += catalog.services[key[0]].input_rate

    for inst in sorted(used):
        spec = catalog.xapp(inst.function_id, inst.chi)
        r = rho.get(inst)
        for k, req in (("mem", spec.mem_req), ("disk", spec.disk_req)):
            have = r[k] if r is not None else 0.0
            if have < req:
                out.append(ConstraintViolation("STORAGE", (str(inst), k), req - have))

    for key in catalog.config_keys:
        if not z.get(key, False):
            continue
        cfg = catalog.config(key)
        svc = catalog.services[key[0]]
        nodes = {f: count.get((key, f), []) for f in cfg.nodes}
        if any(len(insts) != 1 for insts in nodes.values()):
            continue  # already reported as FUNC-COVER
        chosen = {f: catalog.xapp(i[0].function_id, i[0].chi) for f, i in nodes.items()}
        _, q = config_quality(cfg, chosen)
        if q < svc.target_quality - QUALITY_TOL:
            out.append(ConstraintViolation("QUALITY", key, svc.target_quality - q))
        lat = {}
        for f, (inst,) in nodes.items():
            r = rho.get(inst)
            lat[f] = latency_or_inf(r.cpu if r else 0.0, chosen[f].theta, load[inst])
        tau = service_latency(cfg, lat)
        if tau > svc.target_latency * (1 + LATENCY_TOL):
            out.append(ConstraintViolation("LATENCY", key, tau - svc.target_latency))

    total = assignment.total()
    for k in RESOURCES:
        if total[k] > catalog.budget[k] * (1 + BUDGET_TOL):
            out.append(ConstraintViolation("BUDGET", (k,), total[k] - catalog.budget[k]))
    for inst in sorted(rho):
        if any(x < 0 for x in rho[inst]):
            out.append(ConstraintViolation("BUDGET", (str(inst),), -min(rho[inst])))

    f1, f2 = transition_sets(state, assignment)
    out.extend(transition_budget_check(f1, f2, state, assignment, catalog))
    return ViolationReport(tuple(out))
