"""Replay request epochs against each policy and aggregate the metrics."""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baseline import solve_baseline
from .catalog import Catalog
from .engine import EngineParams, solve
from .exact import OracleExceeded, OracleLimits, solve_exact
from .performance import config_quality, latency_or_inf, service_latency
from .scenarios import ScenarioParams, generate_scenario
from .state import Assignment, DeploymentState, check_feasibility

POLICIES = ("oreo", "exact", "baseline")
CSV_COLUMNS = ("scenario", "policy", "seed", "epoch", "deployed_fraction", "priority_sum", "xapp_count",
               "cpu_util", "mem_util", "disk_util", "objective", "upper_bound", "mean_norm_latency",
               "mean_norm_quality", "wall_time_ms", "stop_reason")
# one-sided 90% normal quantile used for the two-sided interval
Z90 = statistics.NormalDist().inv_cdf(0.95)


class FeasibilityError(AssertionError):
    pass


@dataclass(frozen=True)
class EpochSequence:
    """Arrival epoch of every service; each lives for ``lifetime`` epochs."""

    arrivals: dict[str, int]
    epochs: int
    lifetime: int = 2

    @classmethod
    def draw(cls, catalog: Catalog, epochs: int, seed: int, overlap: int = 1) -> "EpochSequence":
        rng = np.random.default_rng([seed, 0x5EED])
        arr = {sid: int(rng.integers(0, max(epochs, 1))) for sid in catalog.service_ids}
        return cls(arr, epochs, 1 + overlap)

    def alive(self, epoch: int) -> list[str]:
        return sorted(s for s, a in self.arrivals.items() if a <= epoch < a + self.lifetime)

    def arriving(self, epoch: int) -> list[str]:
        return sorted(s for s, a in self.arrivals.items() if a == epoch)

    def departing(self, epoch: int) -> list[str]:
        return sorted(s for s, a in self.arrivals.items() if a + self.lifetime == epoch)


@dataclass
class RunReport:
    scenario: str
    policy: str
    seed: int
    epoch: int
    requested: int
    deployed_fraction: float
    priority_sum: float
    xapp_count: int
    cpu_util: float
    mem_util: float
    disk_util: float
    objective: float
    upper_bound: float
    norm_latency: dict[str, float] = field(default_factory=dict)
    norm_quality: dict[str, float] = field(default_factory=dict)
    wall_time_ms: float | None = None
    stop_reason: str = ""

    @property
    def completed(self) -> bool:
        return self.stop_reason != "EXCEEDED"

    @property
    def mean_norm_latency(self) -> float:
        return statistics.fmean(self.norm_latency.values()) if self.norm_latency else math.nan

    @property
    def mean_norm_quality(self) -> float:
        return statistics.fmean(self.norm_quality.values()) if self.norm_quality else math.nan

    def row(self, record_timing: bool = False) -> dict:
        return {
            "scenario": self.scenario, "policy": self.policy, "seed": self.seed, "epoch": self.epoch,
            "deployed_fraction": self.deployed_fraction, "priority_sum": self.priority_sum,
            "xapp_count": self.xapp_count if self.completed else math.nan,
            "cpu_util": self.cpu_util, "mem_util": self.mem_util, "disk_util": self.disk_util,
            "objective": self.objective, "upper_bound": self.upper_bound,
            "mean_norm_latency": self.mean_norm_latency, "mean_norm_quality": self.mean_norm_quality,
            "wall_time_ms": self.wall_time_ms if record_timing else None,
            "stop_reason": self.stop_reason,
        }


def measure(assignment: Assignment, catalog: Catalog) -> tuple[dict[str, float], dict[str, float]]:
    """Per deployed service: latency / target and quality / target."""
    load = defaultdict(float)
    for (key, inst), on in assignment.v.items():
        if on and assignment.z.get(key, False):
            load[inst] += catalog.services[key[0]].input_rate
    chosen = assignment.chosen()
    lat_out, q_out = {}, {}
    for key in assignment.selected():
        svc = catalog.services[key[0]]
        cfg = catalog.config(key)
        insts = {f: chosen[key][f][0] for f in cfg.nodes}
        specs = {f: catalog.xapp(i.function_id, i.chi) for f, i in insts.items()}
        lat = {f: latency_or_inf(assignment.rho[i].cpu, specs[f].theta, load[i]) for f, i in insts.items()}
        lat_out[key[0]] = service_latency(cfg, lat) / svc.target_latency
        q_out[key[0]] = config_quality(cfg, specs)[1] / svc.target_quality
    return lat_out, q_out


def report(scenario: str, policy: str, seed: int, epoch: int, catalog: Catalog, plan,
           wall_ms: float) -> RunReport:
    n = len(catalog.services)
    if isinstance(plan, OracleExceeded):
        nan = math.nan
        return RunReport(scenario, policy, seed, epoch, n, nan, nan, 0, nan, nan, nan, nan, nan,
                         wall_time_ms=wall_ms, stop_reason="EXCEEDED")
    a = plan.assignment
    deployed = a.deployed_services()
    total = a.total()
    b = catalog.budget
    lat, q = measure(a, catalog)
    return RunReport(
        scenario, policy, seed, epoch, n,
        deployed_fraction=len(deployed) / n if n else 0.0,
        priority_sum=sum(catalog.services[s].priority for s in deployed),
        xapp_count=len(a.rho),
        cpu_util=total.cpu / b.cpu, mem_util=total.mem / b.mem, disk_util=total.disk / b.disk,
        objective=plan.objective, upper_bound=plan.upper_bound,
        norm_latency=lat, norm_quality=q, wall_time_ms=wall_ms, stop_reason=plan.stop_reason,
    )


def run_policy(policy: str, catalog: Catalog, state: DeploymentState, engine_params=None, limits=None):
    if policy == "oreo":
        return solve(catalog, state, engine_params)
    if policy == "baseline":
        return solve_baseline(catalog, state)
    if policy == "exact":
        return solve_exact(catalog, state, limits)
    raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def run_experiment(params: ScenarioParams, policies=("oreo", "baseline"), runs: int = 1, epochs: int = 1,
                   seed: int = 0, engine_params: EngineParams | None = None,
                   limits: OracleLimits | None = None, overlap: int = 1,
                   check: bool = True) -> list[RunReport]:
    """One scenario per run, replayed over ``epochs`` request epochs for each policy.

    Every policy keeps its own deployment lineage; each committed plan is
    verified with the independent feasibility checker when ``check`` is set.
    """
    for p in policies:
        if p not in POLICIES:
            raise ValueError(f"unknown policy {p!r}; expected one of {POLICIES}")
    reports = []
    for r in range(runs):
        run_seed = seed + r
        full = generate_scenario(_with_seed(params, run_seed))
        seq = EpochSequence.draw(full, epochs, run_seed, overlap)
        states = {p: DeploymentState.empty() for p in policies}
        for epoch in range(epochs):
            alive = seq.alive(epoch)
            cat = full.restrict(alive)
            for p in policies:
                prev = states[p]
                state = DeploymentState(prev.previous, frozenset(prev.previous.deployed_services() & set(alive)))
                t0 = time.perf_counter()
                plan = run_policy(p, cat, state, engine_params, limits)
                wall = (time.perf_counter() - t0) * 1000.0
                if isinstance(plan, OracleExceeded):
                    committed = Assignment()
                else:
                    committed = plan.assignment
                    if check:
                        rep = check_feasibility(committed, state, cat)
                        if not rep.feasible:
                            raise FeasibilityError(f"{p} seed={run_seed} epoch={epoch}: {rep.to_dict()}")
                states[p] = DeploymentState(committed, frozenset())
                reports.append(report(params.scale, p, run_seed, epoch, cat, plan, wall))
    return reports


def _with_seed(params: ScenarioParams, seed: int) -> ScenarioParams:
    return replace(params, seed=seed)


# ------------------------------------------------------------------ aggregation

def _ci(values):
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        return math.nan, math.nan, 0
    mean = statistics.fmean(vals)
    if len(vals) < 2:
        return mean, math.nan, len(vals)
    return mean, Z90 * statistics.stdev(vals) / math.sqrt(len(vals)), len(vals)


SUMMARY_METRICS = ("deployed_fraction", "priority_sum", "xapp_count", "cpu_util", "mem_util", "disk_util",
                   "objective", "upper_bound", "mean_norm_latency", "mean_norm_quality", "wall_time_ms")


def summarize(rows) -> list[dict]:
    """Mean and 90% normal-approximation interval per (scenario, policy).

    ``rows`` are :class:`RunReport` objects or CSV row dicts. The approximation
    ratio compares oreo with exact on the same (scenario, seed, epoch) and only
    where the oracle completed.
    """
    rows = [r.row(record_timing=True) if isinstance(r, RunReport) else _parse(r) for r in rows]
    groups = defaultdict(list)
    for r in rows:
        groups[(r["scenario"], r["policy"])].append(r)

    exact = {(r["scenario"], r["seed"], r["epoch"]): r for r in rows
             if r["policy"] == "exact" and r["stop_reason"] != "EXCEEDED"}
    ratios = defaultdict(list)
    for r in rows:
        if r["policy"] != "oreo":
            continue
        e = exact.get((r["scenario"], r["seed"], r["epoch"]))
        if e is not None and e["objective"] and e["objective"] > 0:
            ratios[r["scenario"]].append(r["objective"] / e["objective"])

    out = []
    for (scenario, policy) in sorted(groups):
        rs = groups[(scenario, policy)]
        row = {"scenario": scenario, "policy": policy, "n": len(rs),
               "exceeded": sum(r["stop_reason"] == "EXCEEDED" for r in rs)}
        for m in SUMMARY_METRICS:
            mean, half, _ = _ci(r[m] for r in rs)
            row[f"{m}_mean"] = mean
            row[f"{m}_ci90"] = half
        if policy == "oreo":
            vals = ratios.get(scenario, [])
            mean, half, n = _ci(vals)
            row["alpha_mean"] = mean
            row["alpha_min"] = min(vals) if vals else math.nan
            row["alpha_ci90_low"] = mean - half if n >= 2 else math.nan
            row["alpha_n"] = n
        out.append(row)
    return out


# ------------------------------------------------------------------ CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return ""
        return f"{v:.10g}"
    return str(v)


def write_csv(rows: list[dict], path=None, columns=None) -> str:
    if columns is None:
        # ordered union: only some rows carry the approximation-ratio fields
        columns = list(dict.fromkeys(k for r in rows for k in r)) if rows else list(CSV_COLUMNS)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def reports_to_csv(reports: list[RunReport], path=None, record_timing: bool = False) -> str:
    return write_csv([r.row(record_timing) for r in reports], path, CSV_COLUMNS)


def _parse(r: dict) -> dict:
    out = dict(r)
    for k in ("seed", "epoch"):
        out[k] = int(r[k])
    for k in SUMMARY_METRICS:
        out[k] = float(r[k]) if r.get(k) not in (None, "") else math.nan
    return out


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
