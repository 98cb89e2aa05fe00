"""Deterministic timeline replay of a plan over a scenario.

The delegator owns a single uplink, so package packing and transmission
happen back to back, one worker after another, in the order the plan chose
its workers.  Once a worker's transmission completes it runs its own chain
(unpack, process, output pack, output send, receiver unpack) independently
of everyone else.  Every stage lasts exactly what the cost model estimates
for that worker at its assigned object count, which makes the replay a
queueing-aware restatement of the estimates rather than a new model: with
one worker the simulated makespan and the estimate agree exactly, and with
several the difference is precisely the uplink waiting time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .assign import apply_policy, parse_case
from .cost import ScenarioCosts
from .model import Plan, Scenario


@dataclass(frozen=True)
class WorkerTimeline:
    """Stage durations and absolute completion for one active worker."""

    deploy_span: float
    proc_resp_span: float
    finish_at: float


@dataclass(frozen=True)
class SimReport:
    """Per-worker timelines and the overall makespan for one case."""

    case_label: str
    per_worker: dict[str, WorkerTimeline]
    makespan: float
    excluded: frozenset[str]


def deploy_order(plan: Plan) -> list[str]:
    """Workers in the order the delegator serves them.

    Plans with a trace are served in first-pick order; rule-based plans
    (no trace) in ascending node_id order.  Only nodes holding at least
    one object appear.
    """
    active = {nid for nid, wp in plan.assignments.items() if wp > 0}
    if plan.trace:
        order = []
        for step in plan.trace:
            if step.chosen not in order:
                order.append(step.chosen)
        return [nid for nid in order if nid in active]
    return sorted(active)


def simulate(s: Scenario, plan: Plan, case_label: str = "REM",
             parallel_uplink: bool = False) -> SimReport:
    """Replay a plan on the scenario's timeline and report spans.

    With parallel_uplink the serialization is lifted and every worker's
    pack+send starts at time zero, which shows what the estimates assume;
    the default models the single shared uplink.
    """
    costs = ScenarioCosts(s)
    per_worker: dict[str, WorkerTimeline] = {}
    uplink_free = 0.0
    for nid in deploy_order(plan):
        wp = plan.assignments[nid]
        b = costs.breakdown(nid, wp)
        if parallel_uplink:
            arrival = b.pack + b.request_send
        else:
            uplink_free += b.pack + b.request_send
            arrival = uplink_free
        chain = b.unpack + b.process + b.output_pack + b.output_send + b.output_unpack
        per_worker[nid] = WorkerTimeline(
            deploy_span=b.pack + b.request_send + b.unpack,
            proc_resp_span=b.process + b.output_pack + b.output_send + b.output_unpack,
            finish_at=arrival + chain,
        )
    if not per_worker:
        raise ValueError("plan assigns no objects to any node")
    return SimReport(
        case_label=case_label,
        per_worker=per_worker,
        makespan=max(t.finish_at for t in per_worker.values()),
        excluded=plan.excluded,
    )


def compare(s: Scenario, cases: Sequence[str],
            parallel_uplink: bool = False) -> list[SimReport]:
    """Plan and simulate one report per case label, in the given order."""
    if not cases:
        raise ValueError("case list must not be empty")
    reports = []
    for label in cases:
        plan = apply_policy(s, parse_case(s, label))
        reports.append(simulate(s, plan, case_label=label,
                                parallel_uplink=parallel_uplink))
    return reports


def default_cases(s: Scenario) -> list[str]:
    """The standard comparison set: each node alone, even split, greedy."""
    singles = [s.delegator] + [nid for nid in s.node_ids() if nid != s.delegator]
    return singles + ["".join(singles), "REM"]
