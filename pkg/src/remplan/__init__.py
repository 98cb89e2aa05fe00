"""Resource-aware partitioning of batch work across heterogeneous workers.

The package estimates, for every candidate worker, how long packing,
shipping, unpacking, processing and returning a share of the data objects
would take, hands out objects greedily to whoever finishes earliest, and
can replay the resulting plan on a deterministic timeline or push real
packages to loopback worker daemons.
"""

from .assign import (AssignmentPolicy, apply_policy, baseline_assign,
                     brute_force_optimal, parse_case, rem_assign)
from .cost import ScenarioCosts, WorkerView, build_worker_views, get_time, resource_score
from .model import (Calibration, CostBreakdown, DynamicContext, LinkPath,
                    NodeKind, NodeProfile, Plan, RequestSpec, ResourceKind,
                    ResourceWeights, Scenario, TraceStep, validate_scenario)
from .scenario import (ScenarioError, emit_report, load_scenario,
                       parse_scenario, render_scenario, save_scenario, sweep)
from .sim import SimReport, WorkerTimeline, compare, default_cases, deploy_order, simulate

__version__ = "0.1.0"

__all__ = [
    "AssignmentPolicy", "Calibration", "CostBreakdown", "DynamicContext",
    "LinkPath", "NodeKind", "NodeProfile", "Plan", "RequestSpec",
    "ResourceKind", "ResourceWeights", "Scenario", "ScenarioCosts",
    "ScenarioError", "SimReport", "TraceStep", "WorkerTimeline", "WorkerView",
    "apply_policy", "baseline_assign", "brute_force_optimal",
    "build_worker_views", "compare", "default_cases", "deploy_order",
    "emit_report", "get_time", "load_scenario", "parse_case",
    "parse_scenario", "rem_assign", "render_scenario", "resource_score",
    "save_scenario", "simulate", "sweep", "validate_scenario",
]
