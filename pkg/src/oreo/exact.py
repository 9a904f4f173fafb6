"""Exact optimum for small instances by branch and bound.

Any two instances of the same (function, complexity) can be merged into one
without hurting latency (one M/M/1 queue with the summed rate and summed
load is faster than either part) and merging frees a storage footprint. The
search therefore fixes one instance per (function, complexity) and branches
only over each service's choice: skip it, or pick one configuration with one
complexity per function that meets its quality target.

For every complete choice the minimal CPU allocation is computed exactly
(:func:`min_cpu_allocation`). Branches are pruned with an optimistic bound
that splits every instance's storage and latency cost among the services that
could possibly use it, plus a fractional knapsack over the remaining CPU.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .catalog import RESOURCES, Catalog, K, ResourceVector
from .engine import OrchestrationPlan, _check
from .performance import InstanceId, config_quality
from .state import Assignment, DeploymentState, objective

# paths are filled to (1 - SLACK) * T so the result never reads above T
SLACK = 1e-12
FnChi = tuple[str, int]


@dataclass(frozen=True)
class OracleLimits:
    max_nodes: int = 10_000_000
    time_budget: float = 30.0


@dataclass(frozen=True)
class OracleExceeded:
    reason: str
    leaves: int
    elapsed: float
    policy: str = "exact"

    def __str__(self):
        return "exceeded"


@dataclass(frozen=True)
class _Option:
    key: tuple[str, str]
    chis: tuple[tuple[str, int], ...]  # (function, chi) per node, sorted by function
    insts: frozenset[FnChi]
    paths: tuple[tuple[FnChi, ...], ...]
    quality: float


class _Limit(Exception):
    def __init__(self, reason):
        self.reason = reason


# ------------------------------------------------------------------ CPU subproblem

def _tighten(coef, base, target):
    """Smallest w >= 0 with sum coef_i / sqrt(base_i + w) <= target.

    The left side is convex and decreasing in w, so Newton steps started
    left of the root climb to it monotonically.
    """
    def g(w):
        total = dg = 0.0
        for c, b in zip(coef, base):
            x = b + w
            if x <= 0:
                return math.inf, 0.0
            r = c / math.sqrt(x)
            total += r
            dg -= 0.5 * r / x
        return total, dg

    val, _ = g(0.0)
    if val <= target:
        return 0.0
    w = max((sum(coef) / target) ** 2 - max(base), 0.0)
    if w == 0.0:
        w = (min(coef) / target) ** 2
    for _ in range(200):
        val, dg = g(w)
        if val <= target * (1 + 1e-15):
            break
        step = (val - target) / -dg
        w += step
        if step <= 1e-15 * w:
            break
    return w


def _solve_latencies(paths, theta, target, max_newton=200):
    """Latency per instance minimizing sum 1/(theta*l) with every path sum <= target.

    Works on the dual: with path weights w >= 0 the best latencies are
    l = (theta * W)^-1/2 where W sums w over the paths through an instance.
    A few coordinate sweeps (each makes one path exactly tight) give every
    instance a positive weight, then projected Newton steps on the concave
    dual finish the job. The primal point is scaled back into the feasible
    set and every instance then takes all the slack its paths leave.
    """
    insts = sorted({i for p in paths for i in p})
    pos = {i: n for n, i in enumerate(insts)}
    idx = [[pos[i] for i in p] for p in paths]
    A = np.zeros((len(paths), len(insts)))
    for n, p in enumerate(idx):
        A[n, p] = 1.0
    th = np.array([theta[i] for i in insts])
    T = np.array(target)
    coef = (1.0 / np.sqrt(th)).tolist()

    w = np.zeros(len(paths))
    W = np.zeros(len(insts))
    for _ in range(3):
        for n, p in enumerate(idx):
            base = W[p] - w[n]
            new = _tighten([coef[k] for k in p], base.tolist(), target[n])
            W[p] = base + new
            w[n] = new

    def dual(wv):
        Wv = wv @ A
        if np.any(Wv <= 0):
            return -math.inf
        return float(2.0 * np.sum(np.sqrt(Wv / th)) - wv @ T)

    val = dual(w)
    for _ in range(max_newton):
        W = w @ A
        lat = 1.0 / np.sqrt(th * W)
        g = A @ lat - T
        pinned = (w <= 1e-14 * max(w.max(), 1e-300)) & (g <= 0)
        free = ~pinned
        if np.all(np.abs(g[free]) <= 1e-13 * T[free]) and np.all(g[pinned] <= 1e-13 * T[pinned]):
            break
        Af = A[free]
        H = (Af * (0.5 * lat / W)) @ Af.T
        H += np.eye(len(H)) * 1e-15 * np.trace(H)
        d = np.zeros_like(w)
        d[free] = np.linalg.solve(H, g[free])
        step = 1.0
        while step > 1e-20:
            trial = np.maximum(w + step * d, 0.0)
            tv = dual(trial)
            if tv >= val + 1e-4 * float(g @ (trial - w)) or tv > val:
                break
            step *= 0.5
        else:
            break
        if tv <= val and np.allclose(trial, w, rtol=0, atol=0):
            break
        w, val = trial, max(tv, val)

    W = w @ A
    lat = np.where(W > 0, 1.0 / np.sqrt(th * np.maximum(W, 1e-300)), math.inf)
    scale = float(np.min(T / (A @ lat)))
    if scale < 1.0:
        lat = lat * scale
    lat = lat.tolist()
    through = [[] for _ in insts]
    for n, p in enumerate(idx):
        for k in p:
            through[k].append(n)
    for _ in range(100):
        changed = False
        for k in range(len(insts)):
            room = min(target[n] - sum(lat[j] for j in idx[n] if j != k) for n in through[k])
            if room > lat[k] * (1 + 1e-13):
                lat[k] = room
                changed = True
        if not changed:
            break
    return dict(zip(insts, lat))


def min_cpu_allocation(configs, catalog: Catalog, budget_cpu: float | None = None):
    """Least total CPU meeting every path deadline of ``configs``.

    ``configs`` maps a config key to ``{function: chi}`` (or to an iterable of
    :class:`InstanceId`); configs naming the same (function, chi) share one
    instance. Returns ``{(function, chi): cpu}`` or ``None`` when the total
    exceeds ``budget_cpu``.
    """
    theta, load = {}, {}
    paths, target = [], []
    for key in sorted(configs):
        chosen = configs[key]
        if not isinstance(chosen, dict):
            chosen = {i.function_id: i.chi for i in chosen}
        svc = catalog.services[key[0]]
        for f, chi in chosen.items():
            i = (f, chi)
            theta[i] = catalog.xapp(f, chi).theta
            load[i] = load.get(i, 0.0) + svc.input_rate
        for p in catalog.config(key).paths:
            paths.append(tuple((f, chosen[f]) for f in p))
            target.append(svc.target_latency * (1 - SLACK))
    if not paths:
        return {}
    # identical paths only need to be kept once, with the tightest deadline
    uniq: dict[tuple, float] = {}
    for p, t in zip(paths, target):
        uniq[p] = min(uniq.get(p, math.inf), t)
    paths, target = list(uniq), list(uniq.values())
    lat = _solve_latencies(paths, theta, target)
    cpu = {i: (load[i] + 1.0 / lat[i]) / theta[i] for i in sorted(lat)}
    if budget_cpu is not None and sum(cpu.values()) > budget_cpu:
        return None
    return cpu


# ------------------------------------------------------------------ search

def _options(catalog: Catalog) -> dict[str, list[_Option]]:
    out = {}
    for sid in catalog.service_ids:
        svc = catalog.services[sid]
        opts = []
        for cfg in svc.configs:
            nodes = sorted(cfg.nodes)
            for vec in itertools.product(*(catalog.functions[f].chis for f in nodes)):
                chosen = dict(zip(nodes, vec))
                q = config_quality(cfg, {f: catalog.xapp(f, c) for f, c in chosen.items()})[1]
                if q < svc.target_quality - 1e-12:
                    continue
                paths = tuple(tuple((f, chosen[f]) for f in p) for p in cfg.paths)
                opts.append(_Option((sid, cfg.id), tuple(sorted(chosen.items())),
                                    frozenset(chosen.items()), paths, q))
        out[sid] = opts
    return out


class _Search:
    def __init__(self, catalog: Catalog, state: DeploymentState, limits: OracleLimits):
        self.catalog = catalog
        self.state = state
        self.limits = limits
        self.b = catalog.budget
        self.start = time.perf_counter()
        self.leaves = 0
        self.order = sorted(catalog.service_ids, key=lambda s: (-catalog.services[s].priority, s))
        self.options = _options(catalog)
        potential: dict[FnChi, set[str]] = {}
        for sid, opts in self.options.items():
            for o in opts:
                for i in o.insts:
                    potential.setdefault(i, set()).add(sid)
        self.potential = potential
        b = self.b
        self.store = {}
        self.theta = {}
        for i in potential:
            x = catalog.xapp(*i)
            self.theta[i] = x.theta
            self.store[i] = (x.mem_req, x.disk_req, (x.mem_req / b.mem + x.disk_req / b.disk) / K)
        self.coef = {i: 1.0 / math.sqrt(self.theta[i]) for i in potential}
        self.opt_load = {}
        for sid, opts in self.options.items():
            rate = catalog.services[sid].input_rate
            for o in opts:
                self.opt_load[(sid, o)] = sum(rate / self.theta[i] for i in o.insts)
        # per depth: how many undecided services could still use each instance
        self.pending = []
        for d in range(len(self.order) + 1):
            count: dict[FnChi, int] = {}
            for sid in self.order[d:]:
                for i in {i for o in self.options[sid] for i in o.insts}:
                    count[i] = count.get(i, 0) + 1
            self.pending.append(count)
        self.sorted_options = {
            sid: sorted(opts, key=lambda o, sid=sid: (self.opt_load[(sid, o)], o.chis, o.key))
            for sid, opts in self.options.items()}
        self.best_val = 0.0
        self.best: dict[str, _Option] = {}
        self.best_code = ()

    # -- limits
    def tick(self):
        self.leaves += 1
        if self.leaves > self.limits.max_nodes:
            raise _Limit("max_nodes")
        if self.leaves % 16 == 0 and time.perf_counter() - self.start > self.limits.time_budget:
            raise _Limit("time_budget")

    # -- evaluation of a complete choice
    def evaluate(self, choice: dict[str, _Option]):
        b = self.b
        insts = set().union(*(o.insts for o in choice.values())) if choice else set()
        mem = sum(self.store[i][0] for i in insts)
        disk = sum(self.store[i][1] for i in insts)
        if mem > b.mem or disk > b.disk:
            return None
        cpu = min_cpu_allocation({o.key: dict(o.chis) for o in choice.values()}, self.catalog, b.cpu)
        if cpu is None:
            return None
        a = self.assignment(choice, cpu)
        if not self.transition_ok(a):
            return None
        return objective(a, self.catalog), a

    def ids(self, choice):
        """Replica index per (function, chi), reusing continuing services' ids."""
        prev = self.state.previous
        out = {}
        for (key, inst), on in sorted(prev.v.items()):
            if on and key[0] in self.state.continuing and key[0] in choice:
                out.setdefault((inst.function_id, inst.chi), inst.j)
        for inst in sorted(prev.rho):
            out.setdefault((inst.function_id, inst.chi), inst.j)
        return out

    def assignment(self, choice, cpu) -> Assignment:
        ids = self.ids(choice)
        z, v, rho = {}, {}, {}
        for sid in sorted(choice):
            o = choice[sid]
            z[o.key] = True
            for f, chi in o.chis:
                v[(o.key, InstanceId(f, chi, ids.get((f, chi), 0)))] = True
        for (f, chi), c in cpu.items():
            inst = InstanceId(f, chi, ids.get((f, chi), 0))
            rho[inst] = ResourceVector(c, self.store[(f, chi)][0], self.store[(f, chi)][1])
        return Assignment(z, v, rho)

    def transition_ok(self, a: Assignment) -> bool:
        keep = self.state.continuing & a.deployed_services()
        if not keep:
            return True
        prev = self.state.previous
        f1 = {i for (k, i), on in prev.v.items() if on and k[0] in keep and prev.z.get(k, False)}
        f2 = {i for (k, i), on in a.v.items() if on and k[0] in keep}
        for k in RESOURCES:
            total = sum(prev.rho[i][k] for i in f1 - f2 if i in prev.rho) + sum(a.rho[i][k] for i in f2)
            if total > self.b[k]:
                return False
        return True

    # -- bound
    def bound(self, depth, fixed_p, used: set, fixed_cpu: float) -> float:
        """Optimistic objective of any completion of the current partial choice.

        Adding services never lowers the CPU the fixed ones need, and costs at
        least their own load plus the latency slack of instances nobody fixed
        uses yet; that slack and new storage are split among the remaining
        services that could use each instance. A fractional knapsack over the
        CPU left picks the remaining services.
        """
        b = self.b
        kb = K * b.cpu
        cost = sum(self.store[i][2] for i in used) + fixed_cpu / kb
        cap = b.cpu - fixed_cpu
        pending = self.pending[depth]
        items = []
        for sid in self.order[depth:]:
            svc = self.catalog.services[sid]
            best_v, min_w = 0.0, math.inf
            for o in self.options[sid]:
                st = sum(self.store[i][2] / pending[i] for i in o.insts if i not in used)
                slack = 0.0
                for p in o.paths:
                    s = sum(self.coef[i] / math.sqrt(pending[i]) for i in p if i not in used)
                    slack = max(slack, s * s)
                w = self.opt_load[(sid, o)] + slack / svc.target_latency
                val = svc.priority - st - w / kb
                if val > 0:
                    best_v = max(best_v, val)
                    min_w = min(min_w, w)
            if best_v > 0:
                items.append((best_v, min_w))
        items.sort(key=lambda t: -t[0] / max(t[1], 1e-300))
        extra = 0.0
        for val, w in items:
            if w <= cap:
                extra += val
                cap -= w
            else:
                extra += val * max(cap, 0.0) / w
                break
        return fixed_p - cost + extra

    def seed_incumbent(self):
        choice = {}
        for sid in self.order:
            for o in self.sorted_options[sid]:
                trial = dict(choice)
                trial[sid] = o
                if self.evaluate(trial) is not None:
                    choice = trial
                    break
        res = self.evaluate(choice)
        if res is not None and res[0] > self.best_val:
            self.best_val, self.best = res[0], choice
            self.best_code = self.code(choice)

    @staticmethod
    def code(choice):
        return tuple(sorted((s, o.key[1], o.chis) for s, o in choice.items()))

    def run(self):
        self.seed_incumbent()
        self._dfs(0, {}, 0.0, frozenset(), 0.0, {})

    def _leaf(self, choice, alloc):
        a = self.assignment(choice, alloc)
        if not self.transition_ok(a):
            return
        val = objective(a, self.catalog)
        code = self.code(choice)
        if val > self.best_val + 1e-12 or (abs(val - self.best_val) <= 1e-12 and code < self.best_code):
            self.best_val, self.best, self.best_code = val, dict(choice), code

    def _dfs(self, depth, choice, fixed_p, used, fixed_cpu, alloc):
        self.tick()
        if depth == len(self.order):
            self._leaf(choice, alloc)
            return
        if self.bound(depth, fixed_p, used, fixed_cpu) <= self.best_val + 1e-12:
            return
        b = self.b
        sid = self.order[depth]
        p = self.catalog.services[sid].priority
        for o in self.sorted_options[sid]:
            grown = used | o.insts
            if sum(self.store[i][0] for i in grown) > b.mem or sum(self.store[i][1] for i in grown) > b.disk:
                continue
            choice[sid] = o
            cpu = min_cpu_allocation({c.key: dict(c.chis) for c in choice.values()}, self.catalog, b.cpu)
            if cpu is not None:
                self._dfs(depth + 1, choice, fixed_p + p, grown, sum(cpu.values()), cpu)
            del choice[sid]
        self._dfs(depth + 1, choice, fixed_p, used, fixed_cpu, alloc)


def solve_exact(catalog: Catalog, state: DeploymentState | None = None,
                limits: OracleLimits | None = None):
    """Optimal plan, or :class:`OracleExceeded` when the search hits a limit."""
    _check(catalog)
    state = state or DeploymentState.empty()
    limits = limits or OracleLimits()
    search = _Search(catalog, state, limits)
    try:
        search.run()
    except _Limit as exc:
        return OracleExceeded(exc.reason, search.leaves, time.perf_counter() - search.start)
    res = search.evaluate(search.best)
    assignment = res[1] if res is not None else Assignment()
    val = objective(assignment, catalog)
    return OrchestrationPlan(assignment, val, val, search.leaves, "OPTIMAL", policy="exact")
