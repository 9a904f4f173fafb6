"""Turn a relaxed solution into a feasible deployment.

Four stages run in order:

1. xApp selection: cover every function of each selected configuration,
   sharing an already-deployed instance when that is cheaper than a new one.
2. Quality: raise the complexity with the best quality gain per unit of
   resource cost until every service meets its target, then try lowering
   complexities that are not needed.
3. Latency: raise CPU on the critical path, cheapest node first, against an
   equal split of the deadline.
4. Budget: reclaim CPU slack, then drop services by lowest priority and
   highest deployment cost until the budget and transition constraints hold.

None of this touches :func:`oreo.state.check_feasibility`. The checker
referees the result independently.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .catalog import RESOURCES, Catalog, K, ResourceVector
from .performance import InstanceId, config_quality, critical_path, latency_or_inf, required_cpu
from .state import Assignment, ConfigKey, DeploymentState

# deadlines are targeted at (1 - SAFETY) * T so rounding never lands above T
SAFETY = 1e-9
QUALITY_TOL = 1e-12


@dataclass
class RepairTrace:
    actions: list[dict] = field(default_factory=list)

    def add(self, stage, action, **info):
        self.actions.append({"stage": stage, "action": action, **info})

    def extend(self, other: "RepairTrace"):
        self.actions.extend(other.actions)

    def of(self, action: str) -> list[dict]:
        return [a for a in self.actions if a["action"] == action]

    def __len__(self):
        return len(self.actions)

    def to_dict(self) -> dict:
        return {"actions": self.actions}


def _clean(x) -> float:
    try:
        x = float(x)
    except (TypeError, ValueError):
        return 0.0
    return x if math.isfinite(x) and x > 0 else 0.0


class _Work:
    """Mutable deployment used while repairing."""

    def __init__(self, catalog: Catalog, state: DeploymentState | None):
        self.catalog = catalog
        self.state = state or DeploymentState.empty()
        self.use: dict[ConfigKey, dict[str, InstanceId]] = {}
        self.cpu: dict[InstanceId, float] = {}
        self.users: dict[InstanceId, set[ConfigKey]] = defaultdict(set)
        self.trace = RepairTrace()

    # -- bookkeeping
    @classmethod
    def from_assignment(cls, a: Assignment, catalog: Catalog, state=None) -> "_Work":
        w = cls(catalog, state)
        for key in a.selected():
            if key[0] in {k[0] for k in w.use}:
                continue
            w.use[key] = {}
        chosen = a.chosen()
        for key in w.use:
            nodes = catalog.config(key).nodes
            for f, insts in chosen.get(key, {}).items():
                if f in nodes and insts:
                    w.attach(key, f, insts[0], cpu=_clean(a.rho[insts[0]].cpu) if insts[0] in a.rho else 0.0)
        return w

    def to_assignment(self) -> Assignment:
        z = {key: True for key in sorted(self.use)}
        v = {}
        for key in sorted(self.use):
            for f, inst in sorted(self.use[key].items()):
                v[(key, inst)] = True
        rho = {}
        for inst in sorted(self.cpu):
            x = self.catalog.xapp(inst.function_id, inst.chi)
            rho[inst] = ResourceVector(self.cpu[inst], x.mem_req, x.disk_req)
        return Assignment(z, v, rho)

    def spec(self, inst: InstanceId):
        return self.catalog.xapp(inst.function_id, inst.chi)

    def rate(self, key: ConfigKey) -> float:
        return self.catalog.services[key[0]].input_rate

    def load(self, inst: InstanceId) -> float:
        return sum(self.rate(k) for k in self.users.get(inst, ()))

    def latency(self, inst: InstanceId) -> float:
        return latency_or_inf(self.cpu.get(inst, 0.0), self.spec(inst).theta, self.load(inst))

    def attach(self, key, f, inst, cpu=None):
        self.use.setdefault(key, {})[f] = inst
        self.users[inst].add(key)
        if inst not in self.cpu:
            self.cpu[inst] = 0.0
        if cpu is not None:
            self.cpu[inst] = max(self.cpu[inst], cpu)

    def detach(self, key, f) -> InstanceId:
        inst = self.use[key].pop(f)
        self.users[inst].discard(key)
        if not self.users[inst]:
            del self.users[inst]
            del self.cpu[inst]
        return inst

    def drop(self, key):
        """Remove a configuration; surviving sharers keep their latency."""
        lam = self.rate(key)
        for f in sorted(self.use[key]):
            inst = self.detach(key, f)
            if inst in self.cpu:
                self.cpu[inst] = max(self.cpu[inst] - lam / self.spec(inst).theta, 0.0)
        del self.use[key]

    def instances_of(self, f: str, chi: int) -> list[InstanceId]:
        return sorted(i for i in self.cpu if i.function_id == f and i.chi == chi)

    def new_id(self, f: str, chi: int, key: ConfigKey | None = None) -> InstanceId:
        """Fresh replica id, reusing what the RIC already runs when possible."""
        prev = self.state.previous
        taken = set(self.cpu)
        if key is not None:
            for (pk, inst), on in sorted(prev.v.items()):
                if on and pk[0] == key[0] and inst.function_id == f and inst.chi == chi and inst not in taken:
                    return inst
        for inst in sorted(prev.rho):
            if inst.function_id == f and inst.chi == chi and inst not in taken:
                return inst
        used = {i.j for i in taken if i.function_id == f and i.chi == chi}
        used |= {i.j for i in prev.rho if i.function_id == f and i.chi == chi}
        j = 0
        while j in used:
            j += 1
        return InstanceId(f, chi, j)

    # -- metrics
    def quality(self, key, override: dict[str, int] | None = None) -> float:
        cfg = self.catalog.config(key)
        chis = {f: inst.chi for f, inst in self.use[key].items()}
        if override:
            chis.update(override)
        return config_quality(cfg, {f: self.catalog.xapp(f, c) for f, c in chis.items()})[1]

    def node_latency(self, key) -> dict[str, float]:
        return {f: self.latency(inst) for f, inst in self.use[key].items()}

    def tau(self, key) -> float:
        cfg = self.catalog.config(key)
        lat = self.node_latency(key)
        return max(sum(lat[f] for f in p) for p in cfg.paths)

    def total(self) -> ResourceVector:
        cpu = mem = disk = 0.0
        for inst in sorted(self.cpu):
            x = self.spec(inst)
            cpu += self.cpu[inst]
            mem += x.mem_req
            disk += x.disk_req
        return ResourceVector(cpu, mem, disk)

    def inst_cost(self, inst) -> float:
        b = self.catalog.budget
        x = self.spec(inst)
        return (self.cpu[inst] / b.cpu + x.mem_req / b.mem + x.disk_req / b.disk) / K

    def deployment_cost(self, sid: str) -> float:
        out = 0.0
        for key in self.use:
            if key[0] != sid:
                continue
            for inst in self.use[key].values():
                if self.users[inst] == {key}:
                    out += self.inst_cost(inst)
        return out

    def over_budget(self) -> list[str]:
        """Resource types (or ``transition:k``) whose capacity is exceeded."""
        b = self.catalog.budget
        tot = self.total()
        out = [k for k in RESOURCES if tot[k] > b[k]]
        state = self.state
        keep = set(state.continuing) & {k[0] for k in self.use}
        if keep:
            prev = state.previous
            f1 = {inst for (key, inst), on in prev.v.items()
                  if on and key[0] in keep and prev.z.get(key, False)}
            f2 = {inst for key in self.use if key[0] in keep for inst in self.use[key].values()}
            for k in RESOURCES:
                old = sum(prev.rho[i][k] for i in sorted(f1 - f2) if i in prev.rho)
                new = 0.0
                for i in sorted(f2):
                    new += self.cpu[i] if k == "cpu" else self.spec(i).mem_req if k == "mem" else self.spec(i).disk_req
                if old + new > b[k]:
                    out.append(f"transition:{k}")
        return out


# ------------------------------------------------------------------ stage 1

def _entry_chi(catalog, f, target_quality) -> int:
    """Lowest complexity whose own quality could still meet the target."""
    fn = catalog.functions[f]
    for chi in fn.chis:
        if fn.by_chi[chi].q_base >= target_quality:
            return chi
    return fn.chis[-1]


def _node_target(catalog, key) -> float:
    svc = catalog.services[key[0]]
    return svc.target_latency * (1 - SAFETY) / catalog.config(key).depth


def _share_costs(w: _Work, key, f, inst: InstanceId | None, chi: int) -> float:
    """Normalized resource increase of serving (key, f) on ``inst`` (None = new instance)."""
    b = w.catalog.budget
    x = w.catalog.xapp(f, chi)
    lam = w.rate(key)
    l_t = _node_target(w.catalog, key)
    if inst is None:
        return (x.mem_req / b.mem + x.disk_req / b.disk + required_cpu(x.theta, lam, l_t) / b.cpu) / K
    own = [_node_target(w.catalog, k) for k in w.users.get(inst, ())]
    l_old = min(own) if own else l_t
    l_new = min(l_old, l_t)
    extra = lam / x.theta + max(0.0, 1.0 / l_new - 1.0 / l_old) / x.theta
    return extra / b.cpu / K


def _stage_select(w: _Work, relaxed: Assignment):
    cat = w.catalog
    chosen = relaxed.chosen()
    seen = set()
    for key in relaxed.selected():
        if key not in cat.config_keys or key[0] in seen:
            continue
        seen.add(key[0])
        w.use[key] = {}
        cfg = cat.config(key)
        for f, insts in sorted(chosen.get(key, {}).items()):
            if f not in cfg.nodes:
                continue
            for inst in insts:
                fn = cat.functions.get(inst.function_id)
                if fn is not None and inst.chi in fn.by_chi:
                    r = relaxed.rho.get(inst)
                    w.attach(key, f, inst, cpu=_clean(r.cpu) if r is not None else 0.0)
                    break

    for key in sorted(w.use):
        svc = cat.services[key[0]]
        for f in sorted(cat.config(key).nodes):
            if f in w.use[key]:
                continue
            chi = _entry_chi(cat, f, svc.target_quality)
            fresh = _share_costs(w, key, f, None, chi)
            best, best_cost = None, fresh
            for inst in w.instances_of(f, chi):
                c = _share_costs(w, key, f, inst, chi)
                if c < best_cost:
                    best, best_cost = inst, c
            if best is not None:
                w.attach(key, f, best)
                w.cpu[best] += w.rate(key) / w.spec(best).theta
                w.trace.add(1, "share", config=list(key), function=f, instance=str(best),
                            cost=best_cost, fresh_cost=fresh)
            else:
                inst = w.new_id(f, chi, key)
                w.attach(key, f, inst)
                w.trace.add(1, "add", config=list(key), function=f, instance=str(inst), cost=fresh)


# ------------------------------------------------------------------ stage 2

def _move(w: _Work, key, f, chi: int) -> InstanceId:
    """Move (key, f) onto an instance of complexity ``chi``; old sharers keep their latency."""
    lam = w.rate(key)
    old = w.detach(key, f)
    if old in w.cpu:
        w.cpu[old] = max(w.cpu[old] - lam / w.spec(old).theta, 0.0)
    existing = w.instances_of(f, chi)
    if existing:
        inst = existing[0]
        w.attach(key, f, inst)
        w.cpu[inst] += lam / w.spec(inst).theta
    else:
        inst = w.new_id(f, chi, key)
        w.attach(key, f, inst)
    return inst


def _raise_cost(w: _Work, key, f, new_chi: int) -> float:
    b = w.catalog.budget
    cur = w.use[key][f]
    old_x, new_x = w.spec(cur), w.catalog.xapp(f, new_chi)
    lam, l_t = w.rate(key), _node_target(w.catalog, key)
    cpu = (required_cpu(new_x.theta, lam, l_t) - required_cpu(old_x.theta, lam, l_t)) / b.cpu
    store = 0.0
    if not w.instances_of(f, new_chi):
        store += new_x.mem_req / b.mem + new_x.disk_req / b.disk
    if w.users[cur] == {key}:
        store -= old_x.mem_req / b.mem + old_x.disk_req / b.disk
    return (cpu + store) / K


def _stage_quality(w: _Work):
    cat = w.catalog
    for key in sorted(w.use):
        svc = cat.services[key[0]]
        while True:
            q = w.quality(key)
            if q >= svc.target_quality - QUALITY_TOL:
                break
            options = []
            for f in sorted(w.use[key]):
                fn = cat.functions[f]
                cur = w.use[key][f].chi
                higher = [c for c in fn.chis if c > cur]
                if not higher:
                    continue
                nxt = higher[0]
                gain = w.quality(key, {f: nxt}) - q
                cost = _raise_cost(w, key, f, nxt)
                options.append((f, nxt, gain, cost))
            if not options:
                w.trace.add(2, "drop", service=key[0], config=list(key), reason="quality unreachable",
                            quality=q, target=svc.target_quality)
                w.drop(key)
                break
            gaining = [o for o in options if o[2] > 0]
            if gaining:
                # highest gain per unit cost; first function id among ties
                best_eff = max(o[2] / max(o[3], 1e-12) for o in gaining)
                f, nxt, gain, cost = next(o for o in gaining if o[2] / max(o[3], 1e-12) == best_eff)
            else:
                f, nxt, gain, cost = min(options, key=lambda o: (o[3], o[0]))
            before = w.use[key][f]
            inst = _move(w, key, f, nxt)
            w.trace.add(2, "raise-complexity", config=list(key), function=f, before=str(before),
                        after=str(inst), gain=gain, cost=cost)

    # one pass of complexity reductions over deployed instances
    for inst in sorted(w.cpu):
        while inst in w.cpu:
            f = inst.function_id
            lower = [c for c in cat.functions[f].chis if c < inst.chi]
            if not lower:
                break
            nxt = lower[-1]
            users = sorted(w.users[inst])
            ok = all(w.quality(k, {f: nxt}) >= cat.services[k[0]].target_quality - QUALITY_TOL for k in users)
            if not ok or not _reduction_saves(w, inst, nxt):
                break
            moved = None
            for k in users:
                moved = _move(w, k, f, nxt)
            w.trace.add(2, "lower-complexity", function=f, before=str(inst), after=str(moved),
                        configs=[list(k) for k in users])
            inst = moved


def _reduction_saves(w: _Work, inst: InstanceId, chi: int) -> bool:
    b = w.catalog.budget
    old_x = w.spec(inst)
    new_x = w.catalog.xapp(inst.function_id, chi)
    lam = w.load(inst)
    store = -(old_x.mem_req / b.mem + old_x.disk_req / b.disk)
    if not w.instances_of(inst.function_id, chi):
        store += new_x.mem_req / b.mem + new_x.disk_req / b.disk
    cpu = lam / new_x.theta - lam / old_x.theta
    return store + cpu / b.cpu < 0


# ------------------------------------------------------------------ stage 3

def _stage_latency(w: _Work, guard: int = 100000):
    cat = w.catalog
    for _ in range(guard):
        late = [k for k in sorted(w.use)
                if w.tau(k) > cat.services[k[0]].target_latency * (1 - SAFETY / 2)]
        if not late:
            return
        key = late[0]
        svc = cat.services[key[0]]
        lat = w.node_latency(key)
        path = critical_path(cat.config(key), lat)
        target = svc.target_latency * (1 - SAFETY) / len(path)
        best = None
        for f in path:
            if lat[f] <= target * (1 + 1e-12):
                continue
            inst = w.use[key][f]
            need = required_cpu(w.spec(inst).theta, w.load(inst), target) - w.cpu[inst]
            if best is None or need < best[0]:
                best = (need, f, inst)
        need, f, inst = best
        before = w.cpu[inst]
        w.cpu[inst] = required_cpu(w.spec(inst).theta, w.load(inst), target)
        w.trace.add(3, "raise-cpu", config=list(key), instance=str(inst), before=before, after=w.cpu[inst])
    raise RuntimeError("latency adjustment did not converge")


# ------------------------------------------------------------------ stage 4

def _release(w: _Work, stage=4):
    """Lower each instance to the smallest CPU all its sharers' deadlines allow."""
    cat = w.catalog
    for inst in sorted(w.cpu):
        f = inst.function_id
        lat_now = w.latency(inst)
        allowed = math.inf
        for key in sorted(w.users[inst]):
            svc = cat.services[key[0]]
            lat = w.node_latency(key)
            for p in cat.config(key).paths:
                if f in p:
                    rest = sum(lat[g] for g in p if g != f)
                    allowed = min(allowed, svc.target_latency * (1 - SAFETY) - rest)
        if not math.isfinite(allowed) or allowed <= lat_now * (1 + 1e-9):
            continue
        new = required_cpu(w.spec(inst).theta, w.load(inst), allowed)
        if new < w.cpu[inst]:
            w.trace.add(stage, "release-cpu", instance=str(inst), before=w.cpu[inst], after=new)
            w.cpu[inst] = new


def _stage_budget(w: _Work) -> list[str]:
    cat = w.catalog
    dropped = []
    if w.over_budget():
        _release(w)
    while True:
        over = w.over_budget()
        if not over:
            return dropped
        sids = sorted({k[0] for k in w.use})
        cost = {s: w.deployment_cost(s) for s in sids}
        rank = min((cat.services[s].priority, -cost[s]) for s in sids)
        victim = max(s for s in sids if (cat.services[s].priority, -cost[s]) == rank)
        key = next(k for k in w.use if k[0] == victim)
        w.trace.add(4, "drop", service=victim, config=list(key), reason=",".join(over),
                    priority=cat.services[victim].priority, cost=cost[victim])
        w.drop(key)
        dropped.append(victim)
        _release(w)


# ------------------------------------------------------------------ public API

def xapp_selection(relaxed: Assignment, state: DeploymentState | None, catalog: Catalog):
    w = _Work(catalog, state)
    _stage_select(w, relaxed)
    return w.to_assignment(), w.trace


def service_quality_adjustment(assignment: Assignment, catalog: Catalog, state: DeploymentState | None = None):
    w = _Work.from_assignment(assignment, catalog, state)
    _stage_quality(w)
    return w.to_assignment(), w.trace


def service_latency_adjustment(assignment: Assignment, catalog: Catalog, state: DeploymentState | None = None):
    w = _Work.from_assignment(assignment, catalog, state)
    _stage_latency(w)
    return w.to_assignment(), w.trace


def budget_enforcement(assignment: Assignment, state: DeploymentState | None, catalog: Catalog):
    w = _Work.from_assignment(assignment, catalog, state)
    dropped = _stage_budget(w)
    return w.to_assignment(), dropped, w.trace


def repair(relaxed, state: DeploymentState | None, catalog: Catalog) -> tuple[Assignment, RepairTrace]:
    """All four stages in order; the result always satisfies every constraint."""
    a = relaxed.assignment if hasattr(relaxed, "assignment") else relaxed
    w = _Work(catalog, state)
    _stage_select(w, a)
    _stage_quality(w)
    _stage_latency(w)
    _stage_budget(w)
    return w.to_assignment(), w.trace
