"""Quality and latency physics.

Each xApp instance is an M/M/1 queue whose service rate is ``rho_cpu * theta``
and whose arrival rate is the summed input rate of every service configuration
it serves. Service latency is the heaviest source-to-sink path of per-node
latencies; service quality is read at the sink(s) of the configuration graph.
"""
from __future__ import annotations

import math
from typing import Mapping, NamedTuple

from .catalog import Catalog, ConfigGraph, XAppSpec

# rho_cpu * theta must exceed the load by this relative margin to count as stable
STABILITY_MARGIN = 1e-9


class UnstableQueueError(ValueError):
    pass


class UncoveredFunctionError(KeyError):
    pass


class InstanceId(NamedTuple):
    function_id: str
    chi: int
    j: int = 0

    def __str__(self):
        return f"{self.function_id}@{self.chi}#{self.j}"


def is_stable(rho_cpu: float, theta: float, lambda_total: float) -> bool:
    service_rate = rho_cpu * theta
    return service_rate > lambda_total and service_rate >= lambda_total * (1 + STABILITY_MARGIN)


def xapp_latency(rho_cpu: float, theta: float, lambda_total: float, instance=None) -> float:
    """Mean sojourn time ``1 / (rho_cpu*theta - lambda_total)`` of an M/M/1 xApp."""
    if not is_stable(rho_cpu, theta, lambda_total):
        who = f" for instance {instance}" if instance is not None else ""
        raise UnstableQueueError(
            f"unstable queue{who}: service rate {rho_cpu * theta!r} <= load {lambda_total!r}")
    return 1.0 / (rho_cpu * theta - lambda_total)


def latency_or_inf(rho_cpu: float, theta: float, lambda_total: float) -> float:
    if not is_stable(rho_cpu, theta, lambda_total):
        return math.inf
    return 1.0 / (rho_cpu * theta - lambda_total)


def required_cpu(theta: float, lambda_total: float, target_latency: float) -> float:
    """CPU rate that makes the xApp latency exactly ``target_latency``."""
    return (lambda_total + 1.0 / target_latency) / theta


def aggregate_load(instance: InstanceId, assignment, catalog: Catalog) -> float:
    """Summed input rate of the services whose selected configuration uses ``instance``."""
    total = 0.0
    for (key, inst), on in assignment.v.items():
        if on and inst == instance and assignment.z.get(key, False):
            total += catalog.services[key[0]].input_rate
    return total


def config_quality(config: ConfigGraph, chosen: Mapping[str, XAppSpec]) -> tuple[dict[str, float], float]:
    """Per-node output quality and the configuration's quality.

    A node's quality is its own ``q_base`` times the weakest input it receives
    (sources see perfect input). With several sinks the weakest one counts.
    """
    quality: dict[str, float] = {}
    for f in config.order:
        if f not in chosen:
            raise UncoveredFunctionError(f"function {f!r} of config {config.id!r} has no xApp")
        preds = config.predecessors[f]
        upstream = min((quality[p] for p in preds), default=1.0)
        quality[f] = chosen[f].q_base * upstream
    return quality, min(quality[s] for s in config.sinks)


def service_latency(config: ConfigGraph, instance_latency: Mapping[str, float]) -> float:
    """Latency of the most time-consuming source-to-sink path."""
    return max(sum(instance_latency[f] for f in p) for p in config.paths)


def critical_path(config: ConfigGraph, instance_latency: Mapping[str, float]) -> tuple[str, ...]:
    best, best_val = None, -1.0
    for p in config.paths:
        val = sum(instance_latency[f] for f in p)
        if val > best_val:
            best, best_val = p, val
    return best
