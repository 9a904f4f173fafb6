"""Iterative Lagrangian heuristic: relax, repair, tighten multipliers, repeat."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .catalog import Catalog, StructuralError, validate_catalog
from .lagrangian import Multipliers, StepSchedule, solve_relaxation, subgradients, update_multipliers
from .repair import RepairTrace, repair
from .state import Assignment, DeploymentState, objective

GAP_EPS = 1e-12
STOP_REASONS = ("GAP", "STEP_FLOOR", "MAX_ITER", "ZERO_SUBGRADIENT")


@dataclass(frozen=True)
class EngineParams:
    Delta: float = 1e-3  # stop when the relative gap falls below this
    Gamma: float = 1e-3  # stop when the step coefficient falls below this
    Lambda: int = 300  # iteration cap
    N: int = 5  # non-improving iterations before the step coefficient halves
    mu0: float = 2.0  # initial step coefficient
    seed: int = 0  # kept for reproducible reruns; the engine itself is deterministic

    def __post_init__(self):
        for name in ("Delta", "Gamma", "N", "mu0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.Lambda) != self.Lambda or self.Lambda < 1:
            raise ValueError("Lambda must be an integer >= 1")


@dataclass
class OrchestrationPlan:
    assignment: Assignment
    objective: float
    upper_bound: float
    iterations: int
    stop_reason: str
    trace: list[dict] = field(default_factory=list)
    repair_trace: RepairTrace | None = None
    policy: str = "oreo"

    @property
    def gap(self) -> float:
        return (self.upper_bound - self.objective) / max(abs(self.upper_bound), GAP_EPS)

    def to_dict(self, explain: bool = False) -> dict:
        out = {
            "policy": self.policy,
            "objective": self.objective,
            "upper_bound": self.upper_bound if math.isfinite(self.upper_bound) else None,
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "assignment": self.assignment.to_dict(),
        }
        if explain:
            out["trace"] = self.trace
            if self.repair_trace is not None:
                out["repair"] = self.repair_trace.to_dict()
        return out


def _check(catalog: Catalog):
    problems = validate_catalog(catalog)
    if problems:
        first = problems[0]
        raise StructuralError(f"invalid catalog: {first.kind} at {first.entity} {first.detail}".rstrip())


def solve(catalog: Catalog, state: DeploymentState | None = None,
          params: EngineParams | None = None) -> OrchestrationPlan:
    """Best feasible deployment found while the dual bound tightens."""
    _check(catalog)
    params = params or EngineParams()
    state = state or DeploymentState.empty()
    schedule = StepSchedule(mu=params.mu0, N=params.N, Gamma=params.Gamma,
                            Lambda=params.Lambda, Delta=params.Delta)
    mult = Multipliers.zeros(catalog)

    best, best_val, best_trace = Assignment(), -math.inf, None
    ub = math.inf
    trace = []
    reason = "MAX_ITER"
    it = 0
    while True:
        it += 1
        relaxed = solve_relaxation(mult, state, catalog)
        ub = min(ub, relaxed.bound)
        feasible, rtrace = repair(relaxed, state, catalog)
        val = objective(feasible, catalog)
        if val > best_val:
            best, best_val, best_trace = feasible, val, rtrace
        gap = (ub - best_val) / max(abs(ub), GAP_EPS)
        trace.append({"iteration": it, "lagrangian": relaxed.bound, "relaxed_value": relaxed.value,
                      "feasible": val, "lower_bound": best_val, "upper_bound": ub,
                      "mu": schedule.mu, "gap": gap})
        if gap < params.Delta:
            reason = "GAP"
            break
        if it >= params.Lambda:
            reason = "MAX_ITER"
            break
        mult = update_multipliers(mult, subgradients(relaxed, catalog), schedule, relaxed.bound, best_val)
        if schedule.converged:
            reason = "ZERO_SUBGRADIENT"
            break
        if schedule.mu < params.Gamma:
            reason = "STEP_FLOOR"
            break
    return OrchestrationPlan(best, best_val, ub, it, reason, trace, best_trace)
