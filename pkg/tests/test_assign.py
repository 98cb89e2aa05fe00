"""Planners: frozen expected allocations for the bundled fixture, baseline
share rules, brute-force cross-checks, and invariants on random scenarios."""

import random
from dataclasses import replace

import pytest

from remplan.assign import (AssignmentPolicy, apply_policy, baseline_assign,
                            brute_force_optimal, parse_case, rem_assign)
from remplan.cost import ScenarioCosts
from remplan.scenario import load_scenario

from scenario_gen import LAB, LAB_FASTCLOUD, random_scenario

BUNDLED_COUNTS = {"T": 10, "M": 4, "F": 8, "E": 3, "C": 0}
BUNDLED_ESTIMATES = {
    "T": 8.42,
    "M": 7.9404191101335595,
    "F": 8.1915105163203,
    "E": 8.284616552502952,
    "C": 9.236844098524589,
}
PICK_SEQUENCE = "TTFTFMTFTEFMTFTMEFTFMETFT"


def with_request(s, **changes):
    return replace(s, request=replace(s.request, **changes))


def workers_of(s):
    return [nid for nid in s.node_ids() if nid != s.delegator]


def test_bundled_allocation():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert plan.assignments == BUNDLED_COUNTS
    assert plan.predicted_makespan == 8.42
    assert plan.excluded == frozenset({"C"})


def test_bundled_estimates():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert set(plan.estimates) == set(BUNDLED_ESTIMATES)
    for nid, expect in BUNDLED_ESTIMATES.items():
        assert plan.estimates[nid] == pytest.approx(expect, rel=1e-12)


def test_bundled_pick_sequence():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert "".join(step.chosen for step in plan.trace) == PICK_SEQUENCE


def test_trace_records_pre_choice_estimates():
    s = load_scenario(LAB)
    plan = rem_assign(s, s.node_ids())
    assert len(plan.trace) == s.request.num_objects
    assert [step.step_index for step in plan.trace] == list(range(25))
    for step in plan.trace:
        snapshot = dict(step.estimates)
        best = min(snapshot.values())
        ties = sorted(nid for nid, wt in snapshot.items() if wt == best)
        assert step.chosen == ties[0]


def test_count_sweep_allocations():
    # frozen greedy results at 3 MB objects and growing batch sizes
    expectations = [
        (50, {"T": 17, "M": 9, "F": 15, "E": 7, "C": 2}, 14.459745066277177),
        (75, {"T": 25, "M": 13, "F": 22, "E": 11, "C": 4}, 20.12),
        (100, {"T": 32, "M": 18, "F": 28, "E": 15, "C": 7}, 27.516997485658656),
    ]
    base = load_scenario(LAB)
    for count, counts, makespan in expectations:
        s = with_request(base, num_objects=count)
        plan = rem_assign(s, s.node_ids())
        assert plan.assignments == counts
        assert plan.predicted_makespan == pytest.approx(makespan, rel=1e-12)


def test_object_size_sweep_allocations():
    # frozen greedy results at 25 objects and growing per-object payloads
    expectations = [
        (1_000_000, {"T": 9, "M": 5, "F": 8, "E": 3, "C": 0}, 7.974540064866669),
        (2_000_000, {"T": 9, "M": 5, "F": 8, "E": 3, "C": 0}, 8.599540064866668),
        (3_000_000, {"T": 10, "M": 4, "F": 8, "E": 3, "C": 0}, 8.42),
        (4_000_000, {"T": 10, "M": 4, "F": 8, "E": 3, "C": 0}, 8.794616552502951),
        (5_000_000, {"T": 10, "M": 4, "F": 8, "E": 3, "C": 0}, 9.311510516320299),
    ]
    base = load_scenario(LAB)
    for size, counts, makespan in expectations:
        s = with_request(base, byte_d=size)
        plan = rem_assign(s, s.node_ids())
        assert plan.assignments == counts
        assert plan.predicted_makespan == pytest.approx(makespan, rel=1e-12)


def test_fast_cloud_link_pulls_cloud_into_the_plan():
    s = load_scenario(LAB_FASTCLOUD)
    plan = rem_assign(s, s.node_ids())
    assert plan.assignments == {"T": 8, "M": 4, "F": 7, "E": 2, "C": 4}
    assert plan.excluded == frozenset()


def test_single_candidate_gets_everything():
    s = with_request(load_scenario(LAB), num_objects=7)
    plan = rem_assign(s, ["F"])
    assert plan.assignments == {"F": 7}
    assert plan.predicted_makespan == ScenarioCosts(s).breakdown("F", 7).total


def test_identical_candidates_split_evenly():
    rng = random.Random(11)
    found = 0
    while found < 10:
        s = random_scenario(rng, max_workers=4, identical_workers=True)
        cand = workers_of(s)
        if len(cand) < 2:
            continue
        found += 1
        s = with_request(s, num_objects=len(cand) * 6)
        plan = rem_assign(s, cand)
        assert all(plan.assignments[nid] == 6 for nid in cand)


def test_local_only_policy():
    s = load_scenario(LAB)
    plan = apply_policy(s, AssignmentPolicy.local_only())
    assert plan.assignments == {"T": 25}
    assert plan.predicted_makespan == ScenarioCosts(s).breakdown("T", 25).total
    assert plan.excluded == frozenset()
    assert plan.trace == ()


def test_mono_policy():
    s = load_scenario(LAB)
    plan = apply_policy(s, AssignmentPolicy.mono("C"))
    assert plan.assignments == {"C": 25}
    with pytest.raises(ValueError):
        baseline_assign(s, AssignmentPolicy.mono("Q"))


def test_equal_split_shares_and_remainder():
    s = load_scenario(LAB)
    plan = apply_policy(s, AssignmentPolicy.equal_split(s.node_ids()))
    assert plan.assignments == {"T": 5, "M": 5, "F": 5, "E": 5, "C": 5}
    # 27 = 5*5 + 2, the two extras land on the lowest node ids
    plan = apply_policy(with_request(s, num_objects=27),
                        AssignmentPolicy.equal_split(s.node_ids()))
    assert plan.assignments == {"C": 6, "E": 6, "F": 5, "M": 5, "T": 5}


def test_equal_split_rejects_bad_participants():
    s = load_scenario(LAB)
    with pytest.raises(ValueError):
        baseline_assign(s, AssignmentPolicy.equal_split(()))
    with pytest.raises(ValueError):
        baseline_assign(s, AssignmentPolicy.equal_split(("T", "Q")))


def test_rem_rejects_bad_candidates():
    s = load_scenario(LAB)
    with pytest.raises(ValueError):
        rem_assign(s, [])
    with pytest.raises(ValueError):
        rem_assign(s, ["T", "NOPE"])


def test_brute_force_agrees_with_greedy_on_one_candidate():
    s = with_request(load_scenario(LAB), num_objects=9)
    brute = brute_force_optimal(s, ["M"])
    greedy = rem_assign(s, ["M"])
    assert brute.assignments == greedy.assignments
    assert brute.predicted_makespan == greedy.predicted_makespan


def test_brute_force_cap():
    s = load_scenario(LAB)
    with pytest.raises(ValueError, match="exceeds cap"):
        brute_force_optimal(s, s.node_ids(), cap=10)


def test_brute_force_never_beaten_by_greedy():
    rng = random.Random(12)
    for _ in range(40):
        s = random_scenario(rng, max_workers=2, max_objects=12)
        cand = s.node_ids()
        brute = brute_force_optimal(s, cand)
        greedy = rem_assign(s, cand)
        assert brute.predicted_makespan <= greedy.predicted_makespan + 1e-12
        assert sum(brute.assignments.values()) == s.request.num_objects


def test_conservation_and_determinism():
    rng = random.Random(13)
    for _ in range(50):
        s = random_scenario(rng)
        plan_a = rem_assign(s, s.node_ids())
        plan_b = rem_assign(s, s.node_ids())
        assert sum(plan_a.assignments.values()) == s.request.num_objects
        assert plan_a == plan_b


def test_excluded_nodes_never_appear_in_trace():
    rng = random.Random(14)
    for _ in range(50):
        s = random_scenario(rng)
        plan = rem_assign(s, s.node_ids())
        chosen = {step.chosen for step in plan.trace}
        assert chosen.isdisjoint(plan.excluded)
        assert all(plan.assignments[nid] > 0 for nid in chosen)
        assert all(plan.assignments[nid] == 0 for nid in plan.excluded)


def test_candidate_order_does_not_matter():
    s = load_scenario(LAB)
    forward = rem_assign(s, ["T", "M", "F", "E", "C"])
    backward = rem_assign(s, ["C", "E", "F", "M", "T"])
    assert forward.assignments == backward.assignments
    assert forward.predicted_makespan == backward.predicted_makespan


def test_parse_case_grammar():
    s = load_scenario(LAB)
    assert parse_case(s, "REM") == AssignmentPolicy.rem()
    assert parse_case(s, "A.TC") == AssignmentPolicy.rem(("T", "C"))
    assert parse_case(s, "T") == AssignmentPolicy.local_only()
    assert parse_case(s, "M") == AssignmentPolicy.mono("M")
    assert parse_case(s, "TMFEC") == AssignmentPolicy.equal_split(
        ("T", "M", "F", "E", "C"))
    assert parse_case(s, "MF") == AssignmentPolicy.equal_split(("M", "F"))


def test_parse_case_rejects_unknown_labels():
    s = load_scenario(LAB)
    for label in ("TXQ", "A.", "", "rem"):
        with pytest.raises(ValueError, match="case label"):
            parse_case(s, label)


def test_parse_case_multi_letter_ids():
    # longest-match segmentation: node ids need not be single characters
    rng = random.Random(15)
    s = random_scenario(rng, max_workers=3)
    ids = s.node_ids()
    label = "".join(ids)
    assert parse_case(s, label) == AssignmentPolicy.equal_split(tuple(ids))
