"""Joint xApp deployment and sharing for the near-RT RIC."""
from .baseline import solve_baseline
from .catalog import (Catalog, ConfigGraph, FunctionSpec, ResourceVector, ServiceSpec, StructuralError,
                      XAppSpec, validate_catalog)
from .engine import EngineParams, OrchestrationPlan, solve
from .exact import OracleExceeded, OracleLimits, min_cpu_allocation, solve_exact
from .experiment import RunReport, run_experiment, summarize
from .performance import InstanceId, config_quality, required_cpu, service_latency, xapp_latency
from .repair import repair
from .scenarios import ScenarioParams, canned_testbed_scenario, generate_scenario, load_catalog, save_catalog
from .state import Assignment, DeploymentState, check_feasibility, objective

__all__ = [
    "Assignment", "Catalog", "ConfigGraph", "DeploymentState", "EngineParams", "FunctionSpec", "InstanceId",
    "OracleExceeded", "OracleLimits", "OrchestrationPlan", "ResourceVector", "RunReport", "ScenarioParams",
    "ServiceSpec", "StructuralError", "XAppSpec", "canned_testbed_scenario", "check_feasibility",
    "config_quality", "generate_scenario", "load_catalog", "min_cpu_allocation", "objective", "repair",
    "required_cpu", "run_experiment", "save_catalog", "service_latency", "solve", "solve_baseline",
    "solve_exact", "summarize", "validate_catalog", "xapp_latency",
]
