"""Plan builders: greedy cost-driven assignment, naive baselines, brute force.

The greedy planner hands out one object at a time, always to the candidate
whose estimated finish time is currently lowest, so a worker whose fixed
overheads never pay off simply ends up with zero objects (it is "excluded").
Baselines reproduce the comparison cases: keep everything local, ship the
whole batch to one node, or split evenly across a participant list.  The
brute-force planner exists to sanity-check the greedy one on small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterator, Optional, Sequence

from .cost import ScenarioCosts
from .model import Plan, Scenario, TraceStep


@dataclass(frozen=True)
class AssignmentPolicy:
    """Which planner to run and over which nodes.

    kind is one of "rem_greedy", "local_only", "mono", "equal_split".
    target is the destination node for mono; participants restricts
    rem_greedy or lists the equal_split shares.
    """

    kind: str
    target: Optional[str] = None
    participants: tuple[str, ...] = ()

    @classmethod
    def rem(cls, participants: Sequence[str] = ()) -> "AssignmentPolicy":
        return cls("rem_greedy", participants=tuple(participants))

    @classmethod
    def local_only(cls) -> "AssignmentPolicy":
        return cls("local_only")

    @classmethod
    def mono(cls, target: str) -> "AssignmentPolicy":
        return cls("mono", target=target)

    @classmethod
    def equal_split(cls, participants: Sequence[str]) -> "AssignmentPolicy":
        return cls("equal_split", participants=tuple(participants))


def rem_assign(s: Scenario, candidates: Sequence[str]) -> Plan:
    """Greedy one-object-at-a-time assignment over the candidate nodes.

    Estimates start at the zero-object overhead of each candidate.  Each of
    the request's objects goes to the candidate with the smallest current
    estimate (ties to the smallest node_id), whose estimate is then
    recomputed at its new count.  The trace records, per step, the chosen
    node and the estimate vector as it stood before the choice.
    """
    cand = list(dict.fromkeys(candidates))
    if not cand:
        raise ValueError("candidate list must not be empty")
    costs = ScenarioCosts(s)
    for nid in cand:
        if nid not in costs.views:
            raise ValueError(f"unknown candidate node {nid!r}")

    wp = {nid: 0 for nid in cand}
    wt = {nid: costs.breakdown(nid, 0).total for nid in cand}
    tie_order = sorted(cand)
    trace: list[TraceStep] = []
    for step in range(s.request.num_objects):
        chosen = min(tie_order, key=lambda nid: wt[nid])
        trace.append(TraceStep(step, chosen, tuple(sorted(wt.items()))))
        wp[chosen] += 1
        wt[chosen] = costs.breakdown(chosen, wp[chosen]).total
    return _finish_plan(wp, wt, tuple(trace))


def baseline_assign(s: Scenario, policy: AssignmentPolicy) -> Plan:
    """Build the plan for a non-greedy policy at fixed, rule-given counts."""
    nd = s.request.num_objects
    known = set(s.node_ids())
    if policy.kind == "local_only":
        wp = {s.delegator: nd}
    elif policy.kind == "mono":
        if policy.target not in known:
            raise ValueError(f"unknown mono target {policy.target!r}")
        wp = {policy.target: nd}
    elif policy.kind == "equal_split":
        parts = sorted(dict.fromkeys(policy.participants))
        if not parts:
            raise ValueError("equal_split needs at least one participant")
        for nid in parts:
            if nid not in known:
                raise ValueError(f"unknown equal_split participant {nid!r}")
        share, extra = divmod(nd, len(parts))
        wp = {nid: share + (1 if i < extra else 0) for i, nid in enumerate(parts)}
    else:
        raise ValueError(f"not a baseline policy kind: {policy.kind!r}")

    costs = ScenarioCosts(s)
    wt = {nid: costs.breakdown(nid, count).total for nid, count in wp.items()}
    return _finish_plan(wp, wt, ())


def apply_policy(s: Scenario, policy: AssignmentPolicy) -> Plan:
    """Run whichever planner the policy names."""
    if policy.kind == "rem_greedy":
        cand = policy.participants or tuple(s.node_ids())
        return rem_assign(s, cand)
    return baseline_assign(s, policy)


def brute_force_optimal(s: Scenario, candidates: Sequence[str],
                        cap: int = 200_000) -> Plan:
    """Exhaustively minimize the predicted makespan over all splits.

    Candidates are processed in ascending node_id order and splits are
    enumerated lexicographically with strict improvement, so ties resolve
    to the lexicographically smallest count vector.  Refuses instances
    whose composition count exceeds cap.
    """
    cand = sorted(dict.fromkeys(candidates))
    if not cand:
        raise ValueError("candidate list must not be empty")
    nd = s.request.num_objects
    n = len(cand)
    states = comb(nd + n - 1, n - 1)
    if states > cap:
        raise ValueError(f"{states} splits to enumerate exceeds cap {cap}")

    costs = ScenarioCosts(s)
    # totals[j][k] = estimate for candidate j holding k objects
    totals = [[costs.breakdown(nid, k).total for k in range(nd + 1)] for nid in cand]

    best: Optional[tuple[int, ...]] = None
    best_makespan = float("inf")
    for split in _compositions(nd, n):
        mk = max(totals[j][k] for j, k in enumerate(split) if k > 0)
        if mk < best_makespan:
            best_makespan = mk
            best = split
    assert best is not None
    wp = dict(zip(cand, best))
    wt = {nid: totals[j][wp[nid]] for j, nid in enumerate(cand)}
    return _finish_plan(wp, wt, ())


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield every way to write total as an ordered sum of `parts` counts."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


def _finish_plan(wp: dict[str, int], wt: dict[str, float],
                 trace: tuple[TraceStep, ...]) -> Plan:
    active = [wt[nid] for nid, count in wp.items() if count > 0]
    return Plan(
        assignments=dict(sorted(wp.items())),
        estimates=dict(sorted(wt.items())),
        trace=trace,
        predicted_makespan=max(active),
        excluded=frozenset(nid for nid, count in wp.items() if count == 0),
    )


def parse_case(s: Scenario, label: str) -> AssignmentPolicy:
    """Translate a report case label into a policy.

    Grammar: "REM" runs the greedy planner over all nodes; "A.<ids>" runs
    it over just those nodes; a single node id means mono migration (or
    fully local work when it names the delegator); several concatenated
    ids mean an equal split across them.
    """
    if label == "REM":
        return AssignmentPolicy.rem()
    ids = s.node_ids()
    if label.startswith("A."):
        sub = _segment_ids(ids, label[2:])
        if sub is None:
            raise ValueError(f"cannot read node ids from case label {label!r}")
        return AssignmentPolicy.rem(sub)
    sub = _segment_ids(ids, label)
    if sub is None:
        raise ValueError(f"cannot read node ids from case label {label!r}")
    if len(sub) == 1:
        nid = sub[0]
        return AssignmentPolicy.local_only() if nid == s.delegator else AssignmentPolicy.mono(nid)
    return AssignmentPolicy.equal_split(sub)


def _segment_ids(ids: Sequence[str], text: str) -> Optional[list[str]]:
    """Split text into a sequence of known node ids, longest match first."""
    if not text:
        return None
    by_length = sorted(ids, key=len, reverse=True)

    def walk(rest: str) -> Optional[list[str]]:
        if not rest:
            return []
        for nid in by_length:
            if rest.startswith(nid):
                tail = walk(rest[len(nid):])
                if tail is not None:
                    return [nid, *tail]
        return None

    return walk(text)
