"""Seeded scenario generation, the three-service testbed catalog and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import Catalog, ConfigGraph, FunctionSpec, ResourceVector, ServiceSpec, XAppSpec

GENERATOR_VERSION = "1"

# (services, functions, complexity levels)
SCALES = {"S": (8, 8, 2), "M": (8, 8, 3), "L": (10, 8, 3), "XL": (12, 10, 3)}

# nominal memory/disk capacity; footprints are drawn as a fraction of it
NOMINAL_STORAGE = 100.0


@dataclass(frozen=True)
class ScenarioParams:
    scale: str = "S"
    n_services: int | None = None
    n_functions: int | None = None
    n_levels: int | None = None
    configs_per_service: int = 3
    max_functions_per_config: int = 4
    theta_range: tuple[float, float] = (0.5, 2.0)
    theta_decay: float = 0.3
    quality_spread: float = 0.4
    storage_frac: tuple[float, float] = (0.01, 0.04)
    storage_growth: float = 1.2
    rate_range: tuple[float, float] = (1.0, 10.0)
    priorities: tuple[float, ...] = (1.0, 2.0, 3.0)
    latency_targets: tuple[float, ...] = (0.1, 0.2, 0.5)
    quality_targets: tuple[float, ...] = (0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
    extra_edge_prob: float = 0.2
    cpu_budget_factor: float = 0.9
    budget: ResourceVector | None = None
    seed: int = 0

    def dims(self) -> tuple[int, int, int]:
        base = SCALES.get(self.scale, SCALES["S"])
        given = (self.n_services, self.n_functions, self.n_levels)
        return tuple(b if g is None else g for g, b in zip(given, base))


def _random_dag(rng, nodes: list[str], extra_prob: float) -> list[tuple[str, str]]:
    """Connected DAG over ``nodes`` with a single sink."""
    order = [str(n) for n in rng.permutation(nodes)]
    edges = set()
    for i in range(len(order) - 1):
        j = int(rng.integers(i + 1, len(order)))
        edges.add((order[i], order[j]))
    for i in range(len(order)):
        for j in range(i + 2, len(order)):
            if rng.random() < extra_prob:
                edges.add((order[i], order[j]))
    return sorted(edges)


def generate_scenario(params: ScenarioParams) -> Catalog:
    rng = np.random.default_rng(params.seed)
    n_s, n_f, n_x = params.dims()
    fw = max(2, len(str(n_f)))
    sw = max(2, len(str(n_s)))

    functions = {}
    for i in range(n_f):
        fid = f"f{i + 1:0{fw}d}"
        theta0 = rng.uniform(*params.theta_range)
        u = rng.uniform(0.0, 1.0)
        mem0 = rng.uniform(*params.storage_frac) * NOMINAL_STORAGE
        disk0 = rng.uniform(*params.storage_frac) * NOMINAL_STORAGE
        xapps = []
        for chi in range(1, n_x + 1):
            xapps.append(XAppSpec(
                fid, chi,
                theta=float(theta0 / (1 + params.theta_decay * (chi - 1))),
                q_base=float(1 - u * params.quality_spread / math.sqrt(chi)),
                mem_req=float(mem0 * params.storage_growth ** (chi - 1)),
                disk_req=float(disk0 * params.storage_growth ** (chi - 1)),
            ))
        functions[fid] = FunctionSpec(fid, tuple(xapps))

    fids = sorted(functions)
    services = {}
    for i in range(n_s):
        sid = f"s{i + 1:0{sw}d}"
        configs, seen = [], set()
        for c in range(params.configs_per_service):
            for _ in range(20):
                size = int(rng.integers(1, min(params.max_functions_per_config, n_f) + 1))
                nodes = sorted(str(f) for f in rng.choice(fids, size=size, replace=False))
                edges = _random_dag(rng, nodes, params.extra_edge_prob)
                sig = (tuple(nodes), tuple(edges))
                if sig not in seen:
                    break
            seen.add(sig)
            configs.append(ConfigGraph.build(f"c{c + 1}", nodes, edges))

        # only targets that some configuration can reach at top complexity
        best_q = 0.0
        for cfg in configs:
            q = 1.0
            for p in cfg.paths:
                q = min(q, math.prod(functions[f].by_chi[n_x].q_base for f in p))
            best_q = max(best_q, q)
        reachable = [q for q in params.quality_targets if q <= best_q] or [min(params.quality_targets)]
        services[sid] = ServiceSpec(
            sid,
            priority=float(rng.choice(params.priorities)),
            target_latency=float(rng.choice(params.latency_targets)),
            target_quality=float(rng.choice(reachable)),
            input_rate=float(rng.uniform(*params.rate_range)),
            configs=tuple(configs),
        )

    if params.budget is not None:
        budget = params.budget
        factor = None
    else:
        factor = params.cpu_budget_factor
        ref = _reference_cpu(functions, services)
        budget = ResourceVector(factor * ref if ref > 0 else NOMINAL_STORAGE, NOMINAL_STORAGE, NOMINAL_STORAGE)
    meta = {"seed": params.seed, "scale": params.scale, "generator_version": GENERATOR_VERSION,
            "cpu_budget_factor": factor}
    return Catalog(functions, services, budget, meta)


def _reference_cpu(functions, services) -> float:
    """CPU a lowest-complexity, unshared deployment of every service would need."""
    total = 0.0
    for svc in services.values():
        cfg = svc.configs[0]
        for f in cfg.nodes:
            x = functions[f].by_chi[functions[f].chis[0]]
            total += (svc.input_rate + cfg.depth / svc.target_latency) / x.theta
    return total


def canned_testbed_scenario(forecast_q=0.9, classify_q=0.8, slicing_q=0.8,
                            latency=(0.5, 0.2, 0.1)) -> Catalog:
    """Forecasting, classification and slicing over three functions."""
    allowed = {"forecast": (0.9, 0.925, 0.95), "classify": (0.7, 0.8, 0.9), "slicing": (0.6, 0.8, 0.9)}
    for name, q in (("forecast", forecast_q), ("classify", classify_q), ("slicing", slicing_q)):
        if q not in allowed[name]:
            raise ValueError(f"{name} quality target must be one of {allowed[name]}")
    if any(t not in (0.1, 0.2, 0.5) for t in latency):
        raise ValueError("latency targets must be drawn from 0.1, 0.2, 0.5 s")

    def levels(fid, theta, qs, mem, disk):
        return FunctionSpec(fid, tuple(
            XAppSpec(fid, chi, theta / (1 + 0.3 * (chi - 1)), q, mem * 1.2 ** (chi - 1), disk * 1.2 ** (chi - 1))
            for chi, q in enumerate(qs, start=1)))

    functions = {
        "f1": levels("f1", 1.2, (0.9, 0.93, 0.96), 2.0, 3.0),
        "f2": levels("f2", 1.5, (0.75, 0.85, 0.92), 1.5, 2.0),
        "f3": levels("f3", 1.0, (0.8, 0.9, 0.97), 2.5, 2.5),
    }
    services = {
        "forecasting": ServiceSpec("forecasting", 3.0, latency[0], forecast_q, 5.0,
                                   (ConfigGraph.build("c1", ["f1"]),)),
        "classification": ServiceSpec("classification", 2.0, latency[1], classify_q, 4.0,
                                      (ConfigGraph.build("c1", ["f2"]),)),
        "slicing": ServiceSpec("slicing", 1.0, latency[2], slicing_q, 3.0, (
            ConfigGraph.build("c1", ["f1", "f2", "f3"], [("f1", "f3"), ("f2", "f3")]),
            ConfigGraph.build("c2", ["f1", "f3"], [("f1", "f3")]),
            ConfigGraph.build("c3", ["f2", "f3"], [("f2", "f3")]),
            ConfigGraph.build("c4", ["f3"]),
        )),
    }
    return Catalog(functions, services, ResourceVector(100.0, 100.0, 100.0),
                   {"seed": None, "scale": "testbed", "generator_version": GENERATOR_VERSION})


# ------------------------------------------------------------------ JSON

def catalog_to_dict(catalog: Catalog) -> dict:
    return {
        "functions": [
            {"id": fid, "xapps": [{"chi": x.chi, "theta": x.theta, "q_base": x.q_base,
                                   "mem": x.mem_req, "disk": x.disk_req} for x in sorted(fn.xapps, key=lambda x: x.chi)]}
            for fid, fn in sorted(catalog.functions.items())
        ],
        "services": [
            {"id": sid, "priority": s.priority, "target_latency": s.target_latency,
             "target_quality": s.target_quality, "input_rate": s.input_rate,
             "configs": [{"id": c.id, "nodes": sorted(c.nodes), "edges": [list(e) for e in c.edges]}
                         for c in s.configs]}
            for sid, s in sorted(catalog.services.items())
        ],
        "budget": catalog.budget.to_dict(),
        "meta": dict(catalog.meta),
    }


def catalog_from_dict(d: dict) -> Catalog:
    functions = {}
    for f in d["functions"]:
        functions[f["id"]] = FunctionSpec(f["id"], tuple(
            XAppSpec(f["id"], int(x["chi"]), float(x["theta"]), float(x["q_base"]),
                     float(x["mem"]), float(x["disk"])) for x in f["xapps"]))
    services = {}
    for s in d["services"]:
        configs = tuple(ConfigGraph.build(c["id"], c["nodes"], [tuple(e) for e in c.get("edges", [])])
                        for c in s["configs"])
        services[s["id"]] = ServiceSpec(s["id"], float(s["priority"]), float(s["target_latency"]),
                                        float(s["target_quality"]), float(s["input_rate"]), configs)
    b = d["budget"]
    return Catalog(functions, services, ResourceVector(float(b["cpu"]), float(b["mem"]), float(b["disk"])),
                   dict(d.get("meta", {})))


def save_catalog(catalog: Catalog, path) -> None:
    Path(path).write_text(json.dumps(catalog_to_dict(catalog), indent=2, sort_keys=True) + "\n")


def load_catalog(path) -> Catalog:
    return catalog_from_dict(json.loads(Path(path).read_text()))
