"""Monolithic comparison policy.

Every (configuration, complexity vector) of a service is a candidate
monolith: its xApps are sized once for that service alone, with the deadline
split evenly over the configuration's longest path, and are never shared or
resized. Services are placed by descending priority, each taking its
highest-quality candidate that still fits.
"""
from __future__ import annotations

import itertools
import math

from .catalog import RESOURCES, Catalog, ResourceVector
from .engine import OrchestrationPlan, _check
from .performance import InstanceId, config_quality, required_cpu
from .repair import SAFETY
from .state import Assignment, DeploymentState, objective, transition_budget_check, transition_sets


def _candidates(catalog: Catalog, sid: str):
    """(quality, demand, key, {function: chi}, {function: cpu}) for every viable monolith."""
    svc = catalog.services[sid]
    out = []
    for cfg in svc.configs:
        nodes = sorted(cfg.nodes)
        per_node = svc.target_latency * (1 - SAFETY) / cfg.depth
        for vec in itertools.product(*(catalog.functions[f].chis for f in nodes)):
            chis = dict(zip(nodes, vec))
            specs = {f: catalog.xapp(f, c) for f, c in chis.items()}
            q = config_quality(cfg, specs)[1]
            if q < svc.target_quality - 1e-12:
                continue
            cpu = {f: required_cpu(x.theta, svc.input_rate, per_node) for f, x in specs.items()}
            demand = ResourceVector(sum(cpu.values()), sum(x.mem_req for x in specs.values()),
                                    sum(x.disk_req for x in specs.values()))
            out.append((q, demand, (sid, cfg.id), chis, cpu))
    return out


def _fresh_id(f, chi, taken) -> InstanceId:
    j = 0
    while InstanceId(f, chi, j) in taken:
        j += 1
    return InstanceId(f, chi, j)


def _previous_monolith(state: DeploymentState, sid: str, catalog: Catalog):
    """The continuing service's prior instances, if it had them to itself."""
    prev = state.previous
    keys = [k for k in prev.selected() if k[0] == sid]
    if len(keys) != 1 or keys[0] not in catalog.config_keys:
        return None
    key = keys[0]
    users = prev.users()
    insts = [i for (k, i), on in sorted(prev.v.items()) if on and k == key]
    if any(users[i] != [key] or i not in prev.rho for i in insts):
        return None
    return key, {i: prev.rho[i] for i in insts}


def solve_baseline(catalog: Catalog, state: DeploymentState | None = None) -> OrchestrationPlan:
    _check(catalog)
    state = state or DeploymentState.empty()
    b = catalog.budget
    taken = set(state.previous.rho) | state.previous.used_instances()
    a = Assignment()
    used = ResourceVector()

    def fits(trial: Assignment, demand: ResourceVector) -> bool:
        total = used + demand
        if any(total[k] > b[k] for k in RESOURCES):
            return False
        f1, f2 = transition_sets(state, trial)
        return not transition_budget_check(f1, f2, state, trial, catalog)

    order = sorted(catalog.service_ids, key=lambda s: (-catalog.services[s].priority, s))
    for sid in order:
        if sid in state.continuing:
            kept = _previous_monolith(state, sid, catalog)
            if kept is not None and not set(kept[1]) & set(a.rho):
                key, rho = kept
                trial = a.copy()
                trial.z[key] = True
                for inst, r in rho.items():
                    trial.v[(key, inst)] = True
                    trial.rho[inst] = r
                demand = ResourceVector(*(sum(r[k] for r in rho.values()) for k in RESOURCES))
                if fits(trial, demand):
                    a, used = trial, used + demand
                    continue

        cands = sorted(_candidates(catalog, sid),
                       key=lambda c: (-c[0], c[1].normalized(b), c[2], tuple(sorted(c[3].items()))))
        for q, demand, key, chis, cpu in cands:
            trial = a.copy()
            trial.z[key] = True
            for f in sorted(chis):
                inst = _fresh_id(f, chis[f], taken | set(trial.rho))
                x = catalog.xapp(f, chis[f])
                trial.v[(key, inst)] = True
                trial.rho[inst] = ResourceVector(cpu[f], x.mem_req, x.disk_req)
            if fits(trial, demand):
                a, used = trial, used + demand
                break

    val = objective(a, catalog)
    return OrchestrationPlan(a, val, math.nan, 1, "GREEDY", policy="baseline")
