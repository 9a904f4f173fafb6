"""Lagrangian relaxation of the deployment-and-sharing problem.

Relaxed constraints and their multipliers:

* coverage lower bound (a selected configuration needs an xApp per function): ``beta[(key, f)]``
* service quality: ``gamma[key]``
* big-M latency: ``delta[key]``

The relaxed problem splits into LR1 (pick at most one configuration per
service, solved exactly) and LR2 (pick xApps and size them, solved greedily
with a closed-form CPU step).

LR2's greedy point is not guaranteed to be optimal. ``solve_lr2`` also
returns a certified upper bound on the best LR2 value. It drops the budget and
transition constraints and charges each configuration a lower bound on its
share of every instance's cost. The engine uses that bound as its dual
value, so weak duality holds exactly.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog, K, ResourceVector
from .performance import InstanceId, config_quality, latency_or_inf, service_latency
from .state import Assignment, ConfigKey, DeploymentState


@dataclass
class Multipliers:
    beta: dict[tuple[ConfigKey, str], float] = field(default_factory=dict)
    gamma: dict[ConfigKey, float] = field(default_factory=dict)
    delta: dict[ConfigKey, float] = field(default_factory=dict)

    @classmethod
    def zeros(cls, catalog: Catalog) -> "Multipliers":
        beta = {(key, f): 0.0 for key in catalog.config_keys for f in sorted(catalog.config(key).nodes)}
        gamma = {key: 0.0 for key in catalog.config_keys}
        return cls(beta, gamma, dict(gamma))

    def copy(self) -> "Multipliers":
        return Multipliers(dict(self.beta), dict(self.gamma), dict(self.delta))

    def min_value(self) -> float:
        vals = [*self.beta.values(), *self.gamma.values(), *self.delta.values()]
        return min(vals, default=0.0)


@dataclass
class StepSchedule:
    mu: float = 2.0
    N: int = 5
    Gamma: float = 1e-3
    Lambda: int = 300
    Delta: float = 1e-3
    best_lower_bound: float = -math.inf
    best_upper_bound: float = math.inf
    non_improving_count: int = 0
    iteration: int = 0
    converged: bool = False


@dataclass
class RelaxedSolution:
    assignment: Assignment
    value: float  # Lagrangian value at the relaxed point
    bound: float  # LR1 value plus the certified upper bound on LR2
    lr1_value: float = 0.0

    @property
    def lagrangian_value(self) -> float:
        return self.bound


def big_m(catalog: Catalog) -> float:
    if not catalog.services:
        return 0.0
    return 100.0 * catalog.max_target_latency


def closed_form_cpu(lambda_p: float, delta_eff: float, theta: float, k_budget_cpu: float) -> float:
    """Minimizer over rho of ``rho / (K*B_cpu) + delta_eff / (rho*theta - lambda_p)``."""
    return (lambda_p + math.sqrt(max(delta_eff, 0.0) * theta * k_budget_cpu)) / theta


# ---------------------------------------------------------------- relaxed metrics

def relaxed_loads(assignment: Assignment, catalog: Catalog) -> dict[InstanceId, float]:
    """Instance load counting every configuration routed through it, selected or not."""
    load: dict[InstanceId, float] = defaultdict(float)
    for (key, inst), on in assignment.v.items():
        if on:
            load[inst] += catalog.services[key[0]].input_rate
    return load


def relaxed_metrics(assignment: Assignment, catalog: Catalog) -> dict[ConfigKey, tuple[float, float]]:
    """(quality, latency) of every configuration under a possibly partial selection.

    Partially covered configurations have quality 0; uncovered nodes add no
    latency; unstable instances have infinite latency.
    """
    load = relaxed_loads(assignment, catalog)
    chosen = assignment.chosen()
    out = {}
    for key in catalog.config_keys:
        cfg = catalog.config(key)
        per_f = chosen.get(key, {})
        lat = {}
        specs = {}
        for f in cfg.nodes:
            insts = per_f.get(f)
            if not insts:
                lat[f] = 0.0
                continue
            inst = insts[0]
            spec = catalog.xapp(inst.function_id, inst.chi)
            specs[f] = spec
            r = assignment.rho.get(inst)
            lat[f] = latency_or_inf(r.cpu if r else 0.0, spec.theta, load[inst])
        q = config_quality(cfg, specs)[1] if len(specs) == len(cfg.nodes) else 0.0
        out[key] = (q, service_latency(cfg, lat) if specs else 0.0)
    return out


def lagrangian_value(z, v, rho, multipliers: Multipliers, catalog: Catalog) -> tuple[float, float, float]:
    """(total, LR1 part, LR2 part) of the Lagrangian at an arbitrary point."""
    m = big_m(catalog)
    beta, gamma, delta = multipliers.beta, multipliers.gamma, multipliers.delta
    l1 = 0.0
    for key in catalog.config_keys:
        svc = catalog.services[key[0]]
        d = delta.get(key, 0.0)
        if z.get(key, False):
            l1 += svc.priority - gamma.get(key, 0.0) * svc.target_quality - m * d \
                - sum(beta.get((key, f), 0.0) for f in catalog.config(key).nodes)
        l1 += d * (m + svc.target_latency)

    point = Assignment(dict(z), dict(v), dict(rho))
    metrics = relaxed_metrics(point, catalog)
    l2 = 0.0
    for key, (q, tau) in metrics.items():
        g, d = gamma.get(key, 0.0), delta.get(key, 0.0)
        l2 += g * q
        if d:
            l2 -= d * tau
    for (key, inst), on in v.items():
        if on:
            l2 += beta.get((key, inst.function_id), 0.0)
    b = catalog.budget
    l2 -= sum(r.cpu / b.cpu + r.mem / b.mem + r.disk / b.disk for r in rho.values()) / K
    return l1 + l2, l1, l2


# ---------------------------------------------------------------- LR1

def viable_configs(catalog: Catalog) -> frozenset[ConfigKey]:
    """Configurations whose quality target is reachable at top complexity.

    The others cannot appear in any feasible deployment, so both subproblems
    leave them unselected.
    """
    cached = catalog.__dict__.get("_lr_viable")
    if cached is not None:
        return cached
    out = set()
    for key in catalog.config_keys:
        cfg = catalog.config(key)
        top = {f: catalog.xapp(f, catalog.functions[f].chis[-1]) for f in cfg.nodes}
        if config_quality(cfg, top)[1] >= catalog.services[key[0]].target_quality - 1e-12:
            out.add(key)
    catalog.__dict__["_lr_viable"] = frozenset(out)
    return catalog.__dict__["_lr_viable"]


def lr1_scores(multipliers: Multipliers, catalog: Catalog) -> dict[ConfigKey, float]:
    m = big_m(catalog)
    out = {}
    for key in catalog.config_keys:
        svc = catalog.services[key[0]]
        out[key] = (svc.priority - multipliers.gamma.get(key, 0.0) * svc.target_quality
                    - m * multipliers.delta.get(key, 0.0)
                    - sum(multipliers.beta.get((key, f), 0.0) for f in sorted(catalog.config(key).nodes)))
    return out


def solve_lr1(multipliers: Multipliers, catalog: Catalog) -> dict[ConfigKey, bool]:
    """Per service, the best-scoring configuration if its score is positive."""
    scores = lr1_scores(multipliers, catalog)
    viable = viable_configs(catalog)
    z = {key: False for key in catalog.config_keys}
    for sid in catalog.service_ids:
        best = None
        for c in sorted(catalog.services[sid].config_by_id):
            key = (sid, c)
            if key not in viable:
                continue
            if best is None or scores[key] > scores[best]:
                best = key
        if best is not None and scores[best] > 0:
            z[best] = True
    return z


# ---------------------------------------------------------------- LR2

@dataclass
class _ConfigTable:
    key: ConfigKey
    nodes: tuple[str, ...]
    rate: float
    vectors: list[tuple[int, ...]]
    quality: np.ndarray
    fixed: np.ndarray  # attributed storage + load cost of the whole vector
    latcoef: np.ndarray  # max over paths of sum sqrt(attributed latency coefficient)
    node_cost: list[dict[int, float]]  # per node, per chi: attributed storage + load cost


def _tables(catalog: Catalog) -> dict[ConfigKey, _ConfigTable]:
    cached = catalog.__dict__.get("_lr_tables")
    if cached is not None:
        return cached
    b = catalog.budget
    kb = K * b.cpu
    users = {f: max(len(keys), 1) for f, keys in catalog.configs_using.items()}
    tables = {}
    for key in sorted(viable_configs(catalog)):
        cfg = catalog.config(key)
        svc = catalog.services[key[0]]
        nodes = tuple(sorted(cfg.nodes))
        idx = {f: i for i, f in enumerate(nodes)}
        node_cost, node_lat = [], []
        for f in nodes:
            costs, lats = {}, {}
            for chi in catalog.functions[f].chis:
                x = catalog.xapp(f, chi)
                share = (x.mem_req / b.mem + x.disk_req / b.disk) / K / users[f]
                costs[chi] = share + svc.input_rate / (x.theta * kb)
                lats[chi] = math.sqrt(1.0 / (x.theta * kb * users[f]))
            node_cost.append(costs)
            node_lat.append(lats)
        vectors = list(itertools.product(*(catalog.functions[f].chis for f in nodes)))
        q = np.empty(len(vectors))
        fixed = np.empty(len(vectors))
        lat = np.empty(len(vectors))
        for n, vec in enumerate(vectors):
            chosen = {f: catalog.xapp(f, chi) for f, chi in zip(nodes, vec)}
            q[n] = config_quality(cfg, chosen)[1]
            fixed[n] = sum(node_cost[i][chi] for i, chi in enumerate(vec))
            lat[n] = max(sum(node_lat[idx[f]][vec[idx[f]]] for f in p) for p in cfg.paths)
        tables[key] = _ConfigTable(key, nodes, svc.input_rate, vectors, q, fixed, lat, node_cost)
    catalog.__dict__["_lr_tables"] = tables
    return tables


def _config_choice(t: _ConfigTable, multipliers: Multipliers):
    """Best relaxed use of one configuration and an upper bound on its LR2 value.

    Returns (bound, picks) where picks maps node -> chi (possibly partial).
    """
    key = t.key
    betas = [multipliers.beta.get((key, f), 0.0) for f in t.nodes]
    g = multipliers.gamma.get(key, 0.0)
    d = multipliers.delta.get(key, 0.0)
    full = sum(betas) + g * t.quality - t.fixed - 2.0 * math.sqrt(d) * t.latcoef
    n = int(np.argmax(full))
    full_best = float(full[n])

    partial, partial_picks = 0.0, {}
    for i, f in enumerate(t.nodes):
        chi, cost = min(t.node_cost[i].items(), key=lambda kv: (kv[1], kv[0]))
        if betas[i] - cost > 0:
            partial += betas[i] - cost
            partial_picks[f] = chi

    if full_best > 0 and full_best >= partial:
        return full_best, dict(zip(t.nodes, t.vectors[n])), full_best
    return partial, partial_picks, partial


def lr2_bound(multipliers: Multipliers, catalog: Catalog) -> float:
    """Certified upper bound on the LR2 value over every point with stable queues."""
    return sum(_config_choice(t, multipliers)[0] for t in _tables(catalog).values())


def _instance_ids(state: DeploymentState | None):
    """(f, chi) -> preferred replica index, reusing what continuing services run."""
    pref: dict[tuple[str, int], int] = {}
    if state is None:
        return pref
    prev = state.previous
    cont = []
    other = []
    for (key, inst), on in sorted(prev.v.items()):
        if not on:
            continue
        (cont if key[0] in state.continuing else other).append(inst)
    for inst in sorted(prev.rho):
        other.append(inst)
    for inst in cont + sorted(other):
        pref.setdefault((inst.function_id, inst.chi), inst.j)
    return pref


def solve_lr2(multipliers: Multipliers, state: DeploymentState | None, catalog: Catalog):
    """Greedy relaxed xApp selection with closed-form CPU.

    Returns ``(v, rho, bound)``: the relaxed point and the certified bound.
    """
    tables = _tables(catalog)
    b = catalog.budget
    kb = K * b.cpu
    picks: dict[ConfigKey, dict[str, int]] = {}
    value: dict[ConfigKey, float] = {}
    bound = 0.0
    for key, t in tables.items():
        ub, chosen, val = _config_choice(t, multipliers)
        bound += ub
        if chosen:
            picks[key] = chosen
            value[key] = val

    pref = _instance_ids(state)
    # drop the weakest configuration uses until storage and the stable CPU floor fit
    while True:
        groups: dict[tuple[str, int], list[ConfigKey]] = defaultdict(list)
        for key in sorted(picks):
            for f, chi in picks[key].items():
                groups[(f, chi)].append(key)
        mem = disk = floor = 0.0
        for (f, chi), keys in groups.items():
            x = catalog.xapp(f, chi)
            mem += x.mem_req
            disk += x.disk_req
            floor += sum(catalog.services[k[0]].input_rate for k in keys) / x.theta
        if (mem <= b.mem and disk <= b.disk and floor <= b.cpu) or not picks:
            break
        worst = min(picks, key=lambda k: (value[k], k))
        del picks[worst]

    v: dict = {}
    rho: dict = {}
    base_cpu: dict[InstanceId, float] = {}
    for (f, chi), keys in sorted(groups.items()):
        inst = InstanceId(f, chi, pref.get((f, chi), 0))
        x = catalog.xapp(f, chi)
        lam = sum(catalog.services[k[0]].input_rate for k in keys)
        d_eff = sum(multipliers.delta.get(k, 0.0) for k in keys)
        cpu = closed_form_cpu(lam, d_eff, x.theta, kb)
        base_cpu[inst] = lam / x.theta
        rho[inst] = (cpu, x.mem_req, x.disk_req)
        for k in keys:
            v[(k, inst)] = True

    total_cpu = sum(r[0] for r in rho.values())
    if total_cpu > b.cpu:
        surplus = total_cpu - sum(base_cpu.values())
        room = b.cpu * (1 - 1e-12) - sum(base_cpu.values())
        scale = max(room, 0.0) / surplus if surplus > 0 else 0.0
        rho = {i: (base_cpu[i] + (r[0] - base_cpu[i]) * scale, r[1], r[2]) for i, r in rho.items()}

    return v, {i: ResourceVector(*r) for i, r in rho.items()}, bound


def solve_relaxation(multipliers: Multipliers, state: DeploymentState | None, catalog: Catalog) -> RelaxedSolution:
    z = solve_lr1(multipliers, catalog)
    v, rho, bound2 = solve_lr2(multipliers, state, catalog)
    total, l1, _ = lagrangian_value(z, v, rho, multipliers, catalog)
    return RelaxedSolution(Assignment(z, v, rho), total, l1 + bound2, l1)


# ---------------------------------------------------------------- subgradients

@dataclass
class Subgradients:
    beta: dict[tuple[ConfigKey, str], float]
    gamma: dict[ConfigKey, float]
    delta: dict[ConfigKey, float]

    def norm_sq(self) -> float:
        return sum(x * x for d in (self.beta, self.gamma, self.delta) for x in d.values())


def subgradients(relaxed: RelaxedSolution | Assignment, catalog: Catalog) -> Subgradients:
    a = relaxed.assignment if isinstance(relaxed, RelaxedSolution) else relaxed
    m = big_m(catalog)
    metrics = relaxed_metrics(a, catalog)
    chosen = a.chosen()
    g_beta, g_gamma, g_delta = {}, {}, {}
    for key in catalog.config_keys:
        svc = catalog.services[key[0]]
        zk = 1.0 if a.z.get(key, False) else 0.0
        for f in sorted(catalog.config(key).nodes):
            g_beta[(key, f)] = zk - len(chosen.get(key, {}).get(f, ()))
        q, tau = metrics[key]
        g_gamma[key] = svc.target_quality * zk - q
        # infinite latency is capped at the largest value the big-M form admits
        tau = min(tau, m + svc.target_latency)
        g_delta[key] = tau - svc.target_latency - m * (1.0 - zk)
    return Subgradients(g_beta, g_gamma, g_delta)


def update_multipliers(multipliers: Multipliers, gradients: Subgradients, schedule: StepSchedule,
                       relaxed_value: float, best_feasible_value: float) -> Multipliers:
    """Projected subgradient step with a Polyak step length and a halving schedule.

    Components pinned at zero with a negative subgradient cannot move and are
    left out of the direction (and its norm).
    """
    improved = best_feasible_value > schedule.best_lower_bound + 1e-12
    schedule.best_lower_bound = max(schedule.best_lower_bound, best_feasible_value)
    schedule.best_upper_bound = min(schedule.best_upper_bound, relaxed_value)
    schedule.iteration += 1

    def effective(mult, grad):
        return {k: (0.0 if mult.get(k, 0.0) <= 0.0 and g < 0 else g) for k, g in grad.items()}

    eff = Subgradients(effective(multipliers.beta, gradients.beta),
                       effective(multipliers.gamma, gradients.gamma),
                       effective(multipliers.delta, gradients.delta))
    norm_sq = eff.norm_sq()
    if norm_sq == 0.0:
        schedule.converged = True
        return multipliers.copy()

    step = schedule.mu * max(relaxed_value - best_feasible_value, 0.0) / norm_sq

    def move(mult, grad):
        out = dict(mult)
        for k, g in grad.items():
            out[k] = max(0.0, out.get(k, 0.0) + step * g)
        return out

    new = Multipliers(move(multipliers.beta, eff.beta), move(multipliers.gamma, eff.gamma),
                      move(multipliers.delta, eff.delta))
    if improved:
        schedule.non_improving_count = 0
    else:
        schedule.non_improving_count += 1
        if schedule.non_improving_count >= schedule.N:
            schedule.mu /= 2.0
            schedule.non_improving_count = 0
    return new
