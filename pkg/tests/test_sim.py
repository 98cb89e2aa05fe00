"""Timeline replay: frozen makespans for the bundled fixture plus the
structural relations between the replay and the per-worker estimates."""

import random
from dataclasses import replace

import pytest

from remplan.assign import AssignmentPolicy, apply_policy, rem_assign
from remplan.cost import ScenarioCosts
from remplan.model import Plan
from remplan.scenario import load_scenario
from remplan.sim import compare, default_cases, deploy_order, simulate

from scenario_gen import LAB, random_scenario

# frozen timeline results for the bundled fixture (25 objects, 3 MB each)
REM_MAKESPAN = 16.76235113750295
REM_FINISHES = {
    "T": 8.42,
    "F": 9.251510516320298,
    "M": 12.570503320133561,
    "E": 16.76235113750295,
}
MONO_MAKESPANS = {
    "T": 20.12,
    "M": 34.906959159528874,
    "F": 22.417331611597227,
    "E": 39.80735248323888,
    "C": 74.52310619543196,
}
EQUAL_SPLIT_MAKESPAN = 31.91939419486667


def test_bundled_greedy_replay():
    s = load_scenario(LAB)
    rep = simulate(s, rem_assign(s, s.node_ids()))
    assert rep.makespan == pytest.approx(REM_MAKESPAN, rel=1e-9)
    assert set(rep.per_worker) == set(REM_FINISHES)
    for nid, expect in REM_FINISHES.items():
        assert rep.per_worker[nid].finish_at == pytest.approx(expect, rel=1e-9)
    assert rep.excluded == frozenset({"C"})


def test_bundled_mono_replays():
    s = load_scenario(LAB)
    for nid, expect in MONO_MAKESPANS.items():
        policy = (AssignmentPolicy.local_only() if nid == s.delegator
                  else AssignmentPolicy.mono(nid))
        rep = simulate(s, apply_policy(s, policy), case_label=nid)
        assert rep.makespan == pytest.approx(expect, rel=1e-9)
        assert list(rep.per_worker) == [nid]


def test_bundled_equal_split_replay():
    s = load_scenario(LAB)
    plan = apply_policy(s, AssignmentPolicy.equal_split(s.node_ids()))
    rep = simulate(s, plan, case_label="TMFEC")
    assert rep.makespan == pytest.approx(EQUAL_SPLIT_MAKESPAN, rel=1e-9)


def test_single_worker_replay_matches_estimate():
    rng = random.Random(21)
    for _ in range(30):
        s = random_scenario(rng)
        costs = ScenarioCosts(s)
        nd = s.request.num_objects
        for nid in s.node_ids():
            policy = (AssignmentPolicy.local_only() if nid == s.delegator
                      else AssignmentPolicy.mono(nid))
            rep = simulate(s, apply_policy(s, policy))
            assert rep.makespan == pytest.approx(
                costs.breakdown(nid, nd).total, rel=1e-9)


def test_finish_times_equal_uplink_queue_plus_chain():
    rng = random.Random(22)
    for _ in range(20):
        s = random_scenario(rng)
        plan = rem_assign(s, s.node_ids())
        rep = simulate(s, plan)
        costs = ScenarioCosts(s)
        elapsed = 0.0
        for nid in deploy_order(plan):
            b = costs.breakdown(nid, plan.assignments[nid])
            elapsed += b.pack + b.request_send
            chain = (b.unpack + b.process + b.output_pack
                     + b.output_send + b.output_unpack)
            assert rep.per_worker[nid].finish_at == pytest.approx(
                elapsed + chain, rel=1e-12)


def test_parallel_uplink_reproduces_estimates():
    rng = random.Random(23)
    for _ in range(20):
        s = random_scenario(rng)
        plan = rem_assign(s, s.node_ids())
        rep = simulate(s, plan, parallel_uplink=True)
        for nid, timeline in rep.per_worker.items():
            assert timeline.finish_at == pytest.approx(
                plan.estimates[nid], rel=1e-9)
        assert rep.makespan <= simulate(s, plan).makespan + 1e-12


def test_deploy_order_follows_trace_first_picks():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert deploy_order(plan) == ["T", "F", "M", "E"]
    baseline = apply_policy(s, AssignmentPolicy.equal_split(s.node_ids()))
    assert deploy_order(baseline) == ["C", "E", "F", "M", "T"]


def test_deploy_span_plus_processing_covers_finish():
    rng = random.Random(24)
    for _ in range(20):
        s = random_scenario(rng)
        rep = simulate(s, rem_assign(s, s.node_ids()))
        for timeline in rep.per_worker.values():
            # queue wait can only push finish_at past the two spans
            assert timeline.finish_at >= (timeline.deploy_span
                                          + timeline.proc_resp_span) - 1e-12


def test_slower_links_never_speed_anything_up():
    rng = random.Random(25)
    for _ in range(15):
        s = random_scenario(rng)
        plan = rem_assign(s, s.node_ids())
        before = simulate(s, plan)
        slowed = replace(s, links=tuple(
            replace(l, per_byte_time=l.per_byte_time * 3) for l in s.links))
        after = simulate(slowed, plan)
        for nid in before.per_worker:
            assert (after.per_worker[nid].finish_at
                    >= before.per_worker[nid].finish_at - 1e-12)
        assert after.makespan >= before.makespan - 1e-12


def test_simulation_is_deterministic():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert simulate(s, plan) == simulate(s, plan)


def test_simulate_rejects_empty_plan():
    s = load_scenario(LAB)
    empty = Plan(assignments={"T": 0}, estimates={"T": 1.0}, trace=(),
                 predicted_makespan=1.0, excluded=frozenset({"T"}))
    with pytest.raises(ValueError):
        simulate(s, empty)


def test_compare_runs_each_case_in_order():
    s = load_scenario(LAB)
    cases = default_cases(s)
    assert cases == ["T", "M", "F", "E", "C", "TMFEC", "REM"]
    reports = compare(s, cases)
    assert [r.case_label for r in reports] == cases
    assert reports[0].makespan == pytest.approx(MONO_MAKESPANS["T"], rel=1e-9)
    assert reports[-1].makespan == pytest.approx(REM_MAKESPAN, rel=1e-9)
    with pytest.raises(ValueError):
        compare(s, [])
